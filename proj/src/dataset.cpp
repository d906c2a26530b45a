#include "iex/dataset.hpp"

#include <cstring>
#include <fstream>

#include "iex/errors.hpp"

namespace iex {
namespace {

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

class ByteReader {
 public:
  ByteReader(const std::string& path, std::string data) : path_(path), data_(std::move(data)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n)
      throw FormatError(path_ + ": truncated while reading " + std::string(what) +
                        " at byte offset " + std::to_string(pos_) + " (need " + std::to_string(n) +
                        ", have " + std::to_string(remaining()) + ")");
  }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }
  float f32(const char* what) {
    const std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  void bytes(std::uint8_t* dst, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }

 private:
  std::string path_;
  std::string data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open for reading");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

}  // namespace

void dataset_write(const std::string& path, const DatasetHeader& header,
                   std::span<const TransitionRecord> records) {
  if (records.size() != header.count)
    throw ConfigError("dataset_write: header count " + std::to_string(header.count) + " vs " +
                      std::to_string(records.size()) + " records");
  std::string buf;
  buf.reserve(kDatasetHeaderBytes + header.record_bytes() * records.size());
  buf.append("IEXD", 4);
  put_u32(buf, kDatasetVersion);
  buf.push_back(static_cast<char>(header.r));
  put_u16(buf, static_cast<std::uint16_t>(header.m));
  put_u16(buf, static_cast<std::uint16_t>(header.n));
  buf.push_back(static_cast<char>(header.l));
  put_u64(buf, header.count);
  for (const TransitionRecord& rec : records) {
    if (rec.state.size() != header.state_bytes() || rec.next_frame.size() != header.frame_bytes())
      throw ConfigError("dataset_write: record sizes do not match header dims");
    if (rec.action >= header.l)
      throw ConfigError("dataset_write: action " + std::to_string(int(rec.action)) +
                        " out of range [0," + std::to_string(header.l) + ")");
    buf.append(reinterpret_cast<const char*>(rec.state.data()), rec.state.size());
    buf.append(reinterpret_cast<const char*>(rec.next_frame.data()), rec.next_frame.size());
    buf.push_back(static_cast<char>(rec.action));
    put_f32(buf, rec.reward);
    const std::uint8_t flags =
        static_cast<std::uint8_t>((rec.terminal ? 1 : 0) | (rec.truncated ? 2 : 0));
    buf.push_back(static_cast<char>(flags));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError(path + ": write failed");
}

Dataset dataset_read(const std::string& path) {
  ByteReader r(path, read_file(path));
  char magic[4];
  r.bytes(reinterpret_cast<std::uint8_t*>(magic), 4, "magic");
  if (std::memcmp(magic, "IEXD", 4) != 0)
    throw FormatError(path + ": bad magic at byte offset 0 (not an IEXD dataset)");
  const std::uint32_t version = r.u32("version");
  if (version != kDatasetVersion)
    throw FormatError(path + ": unsupported version " + std::to_string(version) +
                      " at byte offset 4");
  Dataset ds;
  ds.header.r = r.u8("r");
  ds.header.m = r.u16("m");
  ds.header.n = r.u16("n");
  ds.header.l = r.u8("l");
  ds.header.count = r.u64("record count");
  if (ds.header.r < 1 || ds.header.m < 1 || ds.header.n < 1 || ds.header.l < 1)
    throw FormatError(path + ": invalid header dimensions");
  ds.records.reserve(ds.header.count);
  for (std::uint64_t i = 0; i < ds.header.count; ++i) {
    TransitionRecord rec;
    rec.state.resize(ds.header.state_bytes());
    rec.next_frame.resize(ds.header.frame_bytes());
    r.bytes(rec.state.data(), rec.state.size(), "record state");
    r.bytes(rec.next_frame.data(), rec.next_frame.size(), "record next frame");
    rec.action = r.u8("record action");
    if (rec.action >= ds.header.l)
      throw FormatError(path + ": action " + std::to_string(int(rec.action)) +
                        " out of range at byte offset " + std::to_string(r.offset() - 1));
    rec.reward = r.f32("record reward");
    const std::uint8_t flags = r.u8("record flags");
    rec.terminal = (flags & 1) != 0;
    rec.truncated = (flags & 2) != 0;
    ds.records.push_back(std::move(rec));
  }
  if (r.remaining() != 0)
    throw FormatError(path + ": " + std::to_string(r.remaining()) +
                      " trailing bytes after the last record at byte offset " +
                      std::to_string(r.offset()));
  return ds;
}

PolicyFn uniform_policy(int actions) {
  return [actions](const FrameStack&, Rng& rng) { return rng.below_int(actions); };
}

Dataset gen_dataset(const EnvSpec& spec, const PolicyFn& policy, std::int64_t n, double epsilon,
                    std::uint64_t seed) {
  spec.validate();
  if (n < 0) throw InputError("gen_dataset: record count must be >= 0");
  Dataset ds;
  ds.header = DatasetHeader{spec.frames, spec.height(), spec.width(), spec.actions(),
                            static_cast<std::uint64_t>(n)};
  Env env(spec);
  Rng action_rng = stream_rng(seed, "gen.actions");
  Rng episode_rng = stream_rng(seed, "gen.episodes");
  env.reset(episode_rng.next_u64());
  for (std::int64_t i = 0; i < n; ++i) {
    if (env.done()) env.reset(episode_rng.next_u64());
    TransitionRecord rec;
    rec.state = env.stack().bytes();
    int action;
    if (action_rng.uniform() < epsilon)
      action = action_rng.below_int(spec.actions());
    else
      action = policy(env.stack(), action_rng);
    const Env::StepOutcome out = env.step(action);
    rec.action = static_cast<std::uint8_t>(action);
    rec.reward = out.reward;
    rec.terminal = out.terminal;
    rec.truncated = out.truncated;
    rec.next_frame = env.stack().last().px;
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

std::vector<std::pair<std::size_t, std::size_t>> episode_ranges(const Dataset& ds) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (ds.records[i].terminal || i + 1 == ds.records.size()) {
      out.emplace_back(start, i + 1);
      start = i + 1;
    }
  }
  return out;
}

Tensor stack_batch(const Dataset& ds, std::span<const std::size_t> idx) {
  const DatasetHeader& h = ds.header;
  Tensor x({static_cast<int>(idx.size()), h.r, h.m, h.n});
  float* out = x.data();
  for (const std::size_t i : idx)
    for (const std::uint8_t p : ds.records[i].state) *out++ = static_cast<float>(p) / 255.0f;
  return x;
}

Tensor next_frame_batch(const Dataset& ds, std::span<const std::size_t> idx) {
  const DatasetHeader& h = ds.header;
  Tensor t({static_cast<int>(idx.size()), 1, h.m, h.n});
  float* out = t.data();
  for (const std::size_t i : idx)
    for (const std::uint8_t p : ds.records[i].next_frame) *out++ = static_cast<float>(p) / 255.0f;
  return t;
}

Tensor action_batch(const Dataset& ds, std::span<const std::size_t> idx) {
  Tensor a({static_cast<int>(idx.size()), ds.header.l});
  for (std::size_t bi = 0; bi < idx.size(); ++bi)
    a[static_cast<Eigen::Index>(bi) * ds.header.l + ds.records[idx[bi]].action] = 1.0f;
  return a;
}

EpisodeSplit split_by_episode(const Dataset& ds, double val_fraction, std::uint64_t seed) {
  const auto episodes = episode_ranges(ds);
  Rng rng = stream_rng(seed, "split.episodes");
  EpisodeSplit split;
  std::vector<bool> is_val(episodes.size(), false);
  bool any_val = false;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    is_val[e] = rng.uniform() < val_fraction;
    any_val = any_val || is_val[e];
  }
  if (!any_val && !episodes.empty() && val_fraction > 0.0) is_val.back() = true;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    auto& dst = is_val[e] ? split.val : split.train;
    for (std::size_t i = episodes[e].first; i < episodes[e].second; ++i) dst.push_back(i);
  }
  return split;
}

}  // namespace iex
