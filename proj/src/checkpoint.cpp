// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "amsinc/trainer.hpp"

namespace amsinc::train {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'A', 'M', 'S', 'N'};
constexpr std::string_view kVPrefix = "optim.v.";
constexpr std::string_view kStepName = "optim.step";

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void put_tensor(std::string_view name, const Tensor& t) {
    put(static_cast<std::uint16_t>(name.size()));
    put_bytes(name);
    put(static_cast<std::uint8_t>(t.rank()));
    for (const std::size_t d : t.shape()) put(static_cast<std::uint32_t>(d));
    put(std::uint8_t{0});
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
    bytes_.insert(bytes_.end(), p, p + t.size() * sizeof(double));
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) {
      throw CheckpointError(CheckpointErrorKind::kTruncated,
                            fmt::format("checkpoint truncated while reading {} at byte {}", what, pos_));
    }
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

Tensor read_tensor_payload(Reader& r, Shape shape, std::uint8_t dtype, const std::string& name) {
  const std::size_t n = shape_numel(shape);
  std::vector<double> v(n);
  if (dtype == 0) {
    for (std::size_t i = 0; i < n; ++i) v[i] = r.get<double>("tensor payload");
  } else if (dtype == 1) {
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(r.get<float>("tensor payload"));
  } else {
    throw CheckpointError(CheckpointErrorKind::kFormat, fmt::format("tensor {}: unknown dtype tag {}", name, dtype));
  }
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const TrainState& state) {
  Writer w;
  w.put_bytes({kMagic, 4});
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint32_t>(state.fingerprint.size()));
  w.put_bytes(state.fingerprint);

  const auto count = static_cast<std::uint32_t>(2 * state.model.params.size() + 1);
  w.put(count);
  for (const auto& e : state.model.params) w.put_tensor(e.name, e.value);
  for (const auto& e : state.optim.v) w.put_tensor(std::string(kVPrefix) + e.name, e.value);
  w.put_tensor(kStepName, Tensor({1}, {static_cast<double>(state.optim.step)}));

  std::ostringstream rng;
  rng << state.rng;
  w.put(static_cast<std::uint32_t>(rng.str().size()));
  w.put_bytes(rng.str());
  w.put(state.epoch);
  return w.take();
}

TrainState decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.get_string(4, "magic") != std::string_view(kMagic, 4)) {
    throw CheckpointError(CheckpointErrorKind::kBadMagic, "not an amsinc checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrorKind::kVersion,
                          fmt::format("checkpoint format version {} is not supported (expected {})", version,
                                      kCheckpointVersion));
  }
  const auto fp_len = r.get<std::uint32_t>("fingerprint length");
  TrainState st;
  st.fingerprint = r.get_string(fp_len, "fingerprint");
  const TrainConfig cfg = config_from_fingerprint(st.fingerprint);

  std::map<std::string, Tensor> table;
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>("tensor name length");
    std::string name = r.get_string(name_len, "tensor name");
    const auto rank = r.get<std::uint8_t>("tensor rank");
    Shape shape;
    for (std::uint8_t k = 0; k < rank; ++k) {
      const auto d = r.get<std::uint32_t>("tensor dims");
      if (d == 0) throw CheckpointError(CheckpointErrorKind::kFormat, "tensor " + name + " has a zero extent");
      shape.push_back(d);
    }
    if (rank == 0) throw CheckpointError(CheckpointErrorKind::kFormat, "tensor " + name + " has rank 0");
    const auto dtype = r.get<std::uint8_t>("tensor dtype");
    Tensor t = read_tensor_payload(r, std::move(shape), dtype, name);
    if (!table.emplace(name, std::move(t)).second) {
      throw CheckpointError(CheckpointErrorKind::kFormat, "tensor " + name + " appears twice");
    }
  }
  const auto rng_len = r.get<std::uint32_t>("rng state length");
  std::istringstream rng_text(r.get_string(rng_len, "rng state"));
  rng_text >> st.rng;
  if (!rng_text) throw CheckpointError(CheckpointErrorKind::kFormat, "checkpoint rng state does not parse");
  st.epoch = r.get<std::uint32_t>("epoch");
  if (!r.done()) throw CheckpointError(CheckpointErrorKind::kFormat, "trailing bytes after checkpoint epoch");

  std::mt19937_64 scratch(0);
  st.model = net::init_model(cfg.model, scratch);
  st.optim = optim::init_state(st.model.params);
  auto take = [&](const std::string& name, Tensor& dst) {
    auto it = table.find(name);
    if (it == table.end()) throw CheckpointError(CheckpointErrorKind::kFormat, "checkpoint lacks tensor " + name);
    if (it->second.shape() != dst.shape()) {
      throw CheckpointError(CheckpointErrorKind::kFormat,
                            fmt::format("tensor {} has shape {}, config implies {}", name,
                                        shape_str(it->second.shape()), shape_str(dst.shape())));
    }
    dst = std::move(it->second);
    table.erase(it);
  };
  for (auto& e : st.model.params) take(e.name, e.value);
  for (auto& e : st.optim.v) take(std::string(kVPrefix) + e.name, e.value);
  Tensor step({1});
  take(std::string(kStepName), step);
  st.optim.step = static_cast<std::uint64_t>(step[0]);
  if (!table.empty()) {
    throw CheckpointError(CheckpointErrorKind::kFormat, "checkpoint has unexpected tensor " + table.begin()->first);
  }
  return st;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(state);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointErrorKind::kIo, "cannot write checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError(CheckpointErrorKind::kIo, "cannot move checkpoint into place: " + ec.message());
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrorKind::kIo, "cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace amsinc::train
