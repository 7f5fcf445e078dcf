#include "climber/model/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include <fmt/format.h>

#include "climber/errors.hpp"

namespace climber::model {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint32_t kMaxNameLength = 4096;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in, const char* what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) {
    throw FormatError(fmt::format("checkpoint truncated while reading {}", what));
  }
  return value;
}

}  // namespace

void write_tensors(std::ostream& out, std::uint64_t config_digest, const std::vector<NamedTensor>& tensors) {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put(out, kCheckpointVersion);
  put(out, config_digest);
  put(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    put(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put(out, static_cast<std::uint32_t>(tensor.rank()));
    for (auto extent : tensor.shape()) put(out, static_cast<std::uint64_t>(extent));
    const auto data = tensor.data();
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
  }
  if (!out) throw IoError("checkpoint write failed");
}

std::vector<NamedTensor> read_tensors(std::istream& in, std::uint64_t expected_digest) {
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw FormatError("not a climber checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) throw FormatError(fmt::format("unsupported checkpoint version {}", version));
  const auto digest = get<std::uint64_t>(in, "config digest");
  if (digest != expected_digest) {
    throw ConfigError(fmt::format("checkpoint config digest {:016x} does not match model digest {:016x}", digest,
                                  expected_digest));
  }
  const auto count = get<std::uint32_t>(in, "tensor count");
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_length = get<std::uint32_t>(in, "name length");
    if (name_length > kMaxNameLength) throw FormatError(fmt::format("tensor name length {} too large", name_length));
    std::string name(name_length, '\0');
    if (!in.read(name.data(), name_length)) throw FormatError("checkpoint truncated in tensor name");
    const auto rank = get<std::uint32_t>(in, "rank");
    if (rank > kMaxRank) throw FormatError(fmt::format("tensor '{}' has rank {}", name, rank));
    numerics::Shape shape(rank);
    for (auto& extent : shape) extent = static_cast<std::size_t>(get<std::uint64_t>(in, "extent"));
    std::vector<double> values(numerics::shape_size(shape));
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw FormatError(fmt::format("checkpoint truncated in data of '{}'", name));
    }
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  return out;
}

void save_tensors(const std::filesystem::path& path, std::uint64_t config_digest,
                  const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  write_tensors(out, config_digest, tensors);
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& path, std::uint64_t expected_digest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open checkpoint '{}'", path.string()));
  return read_tensors(in, expected_digest);
}

void assign_named(const std::vector<NamedTensor>& source, const std::vector<NamedTensor>& target) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& entry : source) by_name[entry.name] = &entry.tensor;
  for (const auto& [name, tensor] : target) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError(fmt::format("checkpoint is missing tensor '{}'", name));
    if (it->second->shape() != tensor.shape()) {
      throw FormatError(fmt::format("tensor '{}' stored as {}, expected {}", name,
                                    numerics::shape_string(it->second->shape()), numerics::shape_string(tensor.shape())));
    }
    const auto values = it->second->data();
    Tensor dst = tensor;
    std::copy(values.begin(), values.end(), dst.mutable_data().begin());
    by_name.erase(it);
  }
  if (!by_name.empty()) throw FormatError(fmt::format("checkpoint has unexpected tensor '{}'", by_name.begin()->first));
}

void save_parameters(const std::filesystem::path& path, std::uint64_t config_digest, const Parameters& params) {
  save_tensors(path, config_digest, params.named());
}

void load_parameters(const std::filesystem::path& path, std::uint64_t expected_digest, Parameters& params) {
  assign_named(load_tensors(path, expected_digest), params.named());
}

}  // namespace climber::model
