#include "climber/sequence/event_log.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <string_view>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "climber/errors.hpp"

namespace climber::sequence {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

template <class T>
std::optional<T> parse_number(std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::optional<double> parse_double(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::string buf(text);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size()) return std::nullopt;
  return v;
}

struct Row {
  UserId user;
  Event event;
};

std::optional<Row> parse_row(std::string_view line) {
  const auto fields = split_tabs(line);
  if (fields.size() != 5 && fields.size() != 6) return std::nullopt;
  const auto user = parse_number<UserId>(fields[0]);
  const auto item = parse_number<ItemId>(fields[1]);
  const auto action = parse_action(fields[2]);
  const auto ts = parse_number<Timestamp>(fields[3]);
  const auto scenario = parse_number<ScenarioId>(fields[4]);
  if (!user || !item || !action || !ts || !scenario || *ts < 0) return std::nullopt;
  Row row{*user, Event{*item, *action, *ts, *scenario, 0.0}};
  if (fields.size() == 6) {
    const auto score = parse_double(fields[5]);
    if (!score) return std::nullopt;
    row.event.score = *score;
  }
  return row;
}

}  // namespace

EventLog parse_events(std::istream& in) {
  EventLog log;
  std::map<UserId, LifecycleSequence> grouped;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool header = first && line.rfind("user", 0) == 0;
    first = false;
    if (header || line.empty()) continue;
    ++log.rows;
    auto row = parse_row(line);
    if (!row) {
      ++log.malformed_rows;
      continue;
    }
    auto& seq = grouped[row->user];
    seq.user = row->user;
    seq.events.push_back(row->event);
  }
  if (log.rows > 0 && log.malformed_rows * 10 > log.rows) {
    throw FormatError(fmt::format("event log: {} of {} rows malformed (limit 10%)", log.malformed_rows, log.rows));
  }
  log.users.reserve(grouped.size());
  for (auto& [user, seq] : grouped) {
    std::stable_sort(seq.events.begin(), seq.events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
    log.users.push_back(std::move(seq));
  }
  return log;
}

EventLog load_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read event log {}", path.string()));
  return parse_events(in);
}

void write_events(std::ostream& out, std::span<const LifecycleSequence> users) {
  out << "user_id\titem_id\taction\ttimestamp\tscenario_id\tscore\n";
  for (const auto& seq : users) {
    for (const auto& e : seq.events) {
      fmt::print(out, "{}\t{}\t{}\t{}\t{}\t{}\n", seq.user, e.item, action_name(e.action), e.timestamp, e.scenario,
                 e.score);
    }
  }
}

void save_events(const std::filesystem::path& path, std::span<const LifecycleSequence> users) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write event log {}", path.string()));
  write_events(out, users);
}

}  // namespace climber::sequence
