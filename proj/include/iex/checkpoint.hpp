#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>

#include "iex/tensor.hpp"

namespace iex {

// Checkpoint layout (little-endian): magic "IEXP", version u32=1, then named
// blocks until EOF: name length u16, name bytes, shape rank u8, dims u32 each,
// f32 data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensor = std::pair<std::string, const Tensor*>;

void save_checkpoint(const std::string& path, std::span<const NamedTensor> blocks);
std::map<std::string, Tensor> load_checkpoint(const std::string& path);

}  // namespace iex
