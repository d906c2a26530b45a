#include "iex/nets.hpp"

namespace iex {

void load_named(const std::map<std::string, Tensor>& blocks,
                std::span<const std::pair<std::string, Tensor*>> dst, const std::string& what) {
  for (const auto& [name, tensor] : dst) {
    const auto it = blocks.find(name);
    if (it == blocks.end())
      throw ConfigError(what + ": checkpoint is missing block '" + name + "'");
    if (it->second.shape() != tensor->shape())
      throw ConfigError(what + ": block '" + name + "' has shape " +
                        shape_str(it->second.shape()) + ", expected " +
                        shape_str(tensor->shape()) +
                        " (checkpoint from a different architecture?)");
    *tensor = it->second;
  }
}

}  // namespace iex
