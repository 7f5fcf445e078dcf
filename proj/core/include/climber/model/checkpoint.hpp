#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "climber/model/parameters.hpp"

namespace climber::model {

inline constexpr char kCheckpointMagic[8] = {'C', 'L', 'I', 'M', 'B', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout, all integers little-endian:
//   magic[8] u32 version u64 config_digest u32 count
//   count × { u32 name_len, name bytes, u32 rank, rank × u64 extent, f64 data }
void write_tensors(std::ostream& out, std::uint64_t config_digest, const std::vector<NamedTensor>& tensors);
// Throws FormatError on a bad header or truncated body and ConfigError when
// the stored digest differs from `expected_digest`.
std::vector<NamedTensor> read_tensors(std::istream& in, std::uint64_t expected_digest);

void save_tensors(const std::filesystem::path& path, std::uint64_t config_digest,
                  const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensors(const std::filesystem::path& path, std::uint64_t expected_digest);

// Parameters of a model with the given config digest. Loading copies values
// into `params` in place and requires the exact named set stored by saving.
void save_parameters(const std::filesystem::path& path, std::uint64_t config_digest, const Parameters& params);
void load_parameters(const std::filesystem::path& path, std::uint64_t expected_digest, Parameters& params);

// Copies tensors by name into `target` (shapes must agree). Throws FormatError
// for missing, unexpected or misshapen entries.
void assign_named(const std::vector<NamedTensor>& source, const std::vector<NamedTensor>& target);

}  // namespace climber::model
