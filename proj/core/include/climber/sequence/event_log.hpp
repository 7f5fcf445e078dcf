#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "climber/sequence/event.hpp"

namespace climber::sequence {

struct EventLog {
  // One sequence per user, ordered by user id.
  std::vector<LifecycleSequence> users;
  std::size_t rows = 0;
  std::size_t malformed_rows = 0;
};

// Reads `user\titem\taction\ttimestamp\tscenario[\tscore]` rows. A header
// line starting with "user" is skipped, as are blank lines. Rows are grouped
// per user and stably sorted by timestamp.
// Throws IoError if the file cannot be read and FormatError when more than
// 10% of the data rows are malformed.
EventLog load_events(const std::filesystem::path& path);
EventLog parse_events(std::istream& in);

// Writes sequences in the same TSV layout (with header), score column included.
void write_events(std::ostream& out, std::span<const LifecycleSequence> users);
void save_events(const std::filesystem::path& path, std::span<const LifecycleSequence> users);

}  // namespace climber::sequence
