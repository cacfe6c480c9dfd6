#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "decor/adam.hpp"

namespace decor::ad {

// DGCK layout (little endian):
//   "DGCK" | u32 count | count x { u16 name_len | name (UTF-8) | u8 rank | u32 dims[rank] | f32 payload }
std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

// Copies stored values into `targets` by name. Names under any of
// `ignored_prefixes` are skipped; any other stored name that is not a target,
// a shape mismatch, or a target missing from `stored` is a FormatError.
void assign_parameters(const std::vector<NamedTensor>& stored, std::vector<NamedTensor>& targets,
                       const std::vector<std::string>& ignored_prefixes = {});

const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);

}  // namespace decor::ad
