#include "iex/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace iex {
namespace {

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

void save_checkpoint(const std::string& path, std::span<const NamedTensor> blocks) {
  std::string buf;
  buf.append("IEXP", 4);
  put_u32(buf, kCheckpointVersion);
  for (const auto& [name, tensor] : blocks) {
    if (name.empty() || name.size() > 0xffff)
      throw ConfigError("checkpoint block name length out of range: '" + name + "'");
    put_u16(buf, static_cast<std::uint16_t>(name.size()));
    buf.append(name);
    buf.push_back(static_cast<char>(tensor->rank()));
    for (const int d : tensor->shape()) put_u32(buf, static_cast<std::uint32_t>(d));
    const std::size_t nbytes = static_cast<std::size_t>(tensor->size()) * 4;
    const std::size_t at = buf.size();
    buf.resize(at + nbytes);
    std::memcpy(buf.data() + at, tensor->data(), nbytes);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError(path + ": write failed");
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open for reading");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  const auto need = [&](std::size_t n, const char* what) {
    if (data.size() - pos < n)
      throw FormatError(path + ": truncated while reading " + std::string(what) +
                        " at byte offset " + std::to_string(pos));
  };
  const auto u16 = [&](const char* what) {
    need(2, what);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(data[pos++])) << (8 * i);
    return v;
  };
  const auto u32 = [&](const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data[pos++])) << (8 * i);
    return v;
  };

  need(4, "magic");
  if (std::memcmp(data.data(), "IEXP", 4) != 0)
    throw FormatError(path + ": bad magic at byte offset 0 (not an IEXP checkpoint)");
  pos = 4;
  const std::uint32_t version = u32("version");
  if (version != kCheckpointVersion)
    throw FormatError(path + ": unsupported version " + std::to_string(version));

  std::map<std::string, Tensor> blocks;
  while (pos < data.size()) {
    const std::uint16_t name_len = u16("block name length");
    need(name_len, "block name");
    std::string name(data.data() + pos, name_len);
    pos += name_len;
    need(1, "block rank");
    const int rank = static_cast<std::uint8_t>(data[pos++]);
    std::vector<int> shape(static_cast<std::size_t>(rank));
    for (int i = 0; i < rank; ++i) shape[static_cast<std::size_t>(i)] = static_cast<int>(u32("block dim"));
    Tensor t(shape);
    const std::size_t nbytes = static_cast<std::size_t>(t.size()) * 4;
    need(nbytes, ("block '" + name + "' data").c_str());
    std::memcpy(t.data(), data.data() + pos, nbytes);
    pos += nbytes;
    if (!blocks.emplace(std::move(name), std::move(t)).second)
      throw FormatError(path + ": duplicate block name");
  }
  return blocks;
}

}  // namespace iex
