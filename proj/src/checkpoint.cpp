#include "hrm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

#include "hrm/dataset.hpp"
#include "hrm/errors.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

namespace hrm {

namespace {

constexpr char kMagic[8] = {'H', 'R', 'M', 'C', 'K', 'P', 'T', '1'};

class Writer {
 public:
  template <class V>
  void put(V v) {
    char buf[sizeof(V)];
    std::memcpy(buf, &v, sizeof(V));
    out_.append(buf, sizeof(V));
  }
  void bytes(const char* p, std::size_t n) { out_.append(p, n); }
  void array(const std::string& name, const Matrix<float>& m) {
    put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    bytes(name.data(), name.size());
    put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
    put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
    bytes(reinterpret_cast<const char*>(m.data()), sizeof(float) * static_cast<std::size_t>(m.size()));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <class V>
  V get() {
    V v;
    std::memcpy(&v, take(sizeof(V)), sizeof(V));
    return v;
  }
  const char* take(std::size_t n) {
    if (in_.size() - pos_ < n) throw std::runtime_error("truncated checkpoint");
    const char* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  void array(const std::string& expected, Matrix<float>& m) {
    const auto len = get<std::uint32_t>();
    const std::string name(take(len), len);
    if (name != expected) throw std::runtime_error("expected array '" + expected + "', found '" + name + "'");
    const auto rows = get<std::uint32_t>();
    const auto cols = get<std::uint32_t>();
    m.resize(rows, cols);
    std::memcpy(m.data(), take(sizeof(float) * rows * cols), sizeof(float) * rows * cols);
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  const ModelConfig& c = ckpt.config;
  for (int v : {c.box_size, c.width, c.heads, c.n_cycles, c.t_low, c.max_segments, c.min_segments}) {
    w.put<std::int32_t>(v);
  }
  w.put<double>(c.epsilon);
  w.put<std::uint64_t>(c.seed);
  w.put<std::int64_t>(ckpt.step);
  w.put<std::uint64_t>(ckpt.manifest_hash);
  w.put<std::uint8_t>(ckpt.optimizer ? 1 : 0);
  w.put<std::int64_t>(ckpt.optimizer ? ckpt.optimizer->step : 0);

  const auto named = ckpt.params.named(true);
  const auto trainable = ckpt.params.named(false);
  std::uint32_t count = static_cast<std::uint32_t>(named.size());
  if (ckpt.optimizer) {
    if (ckpt.optimizer->first_moment.size() != trainable.size() ||
        ckpt.optimizer->second_moment.size() != trainable.size()) {
      throw ShapeError("checkpoint: optimizer state does not match parameters");
    }
    count += static_cast<std::uint32_t>(2 * trainable.size());
  }
  w.put<std::uint32_t>(count);
  for (const auto& [name, m] : named) w.array(name, *m);
  if (ckpt.optimizer) {
    for (std::size_t i = 0; i < trainable.size(); ++i) {
      w.array("adam.m/" + trainable[i].first, ckpt.optimizer->first_moment[i]);
    }
    for (std::size_t i = 0; i < trainable.size(); ++i) {
      w.array("adam.v/" + trainable[i].first, ckpt.optimizer->second_moment[i]);
    }
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("bad magic");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  ModelConfig& c = ckpt.config;
  for (int* field : {&c.box_size, &c.width, &c.heads, &c.n_cycles, &c.t_low, &c.max_segments, &c.min_segments}) {
    *field = r.get<std::int32_t>();
  }
  c.epsilon = r.get<double>();
  c.seed = r.get<std::uint64_t>();
  c.validate();
  ckpt.step = r.get<std::int64_t>();
  ckpt.manifest_hash = r.get<std::uint64_t>();
  const bool has_optimizer = r.get<std::uint8_t>() != 0;
  const auto optimizer_step = r.get<std::int64_t>();

  auto named = ckpt.params.named(true);
  const auto trainable = ckpt.params.named(false);
  const auto count = r.get<std::uint32_t>();
  const std::size_t expected = named.size() + (has_optimizer ? 2 * trainable.size() : 0);
  if (count != expected) throw std::runtime_error("array count " + std::to_string(count) + ", expected " + std::to_string(expected));
  for (auto& [name, m] : named) r.array(name, *m);
  if (has_optimizer) {
    AdamState<float> s;
    s.step = optimizer_step;
    s.first_moment.resize(trainable.size());
    s.second_moment.resize(trainable.size());
    for (std::size_t i = 0; i < trainable.size(); ++i) r.array("adam.m/" + trainable[i].first, s.first_moment[i]);
    for (std::size_t i = 0; i < trainable.size(); ++i) r.array("adam.v/" + trainable[i].first, s.second_moment[i]);
    ckpt.optimizer = std::move(s);
  }
  if (!r.done()) throw std::runtime_error("trailing bytes");

  const ModelParams<float> fresh = init_params<float>(c);
  const auto ref = fresh.named(true);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (ref[i].second->rows() != named[i].second->rows() || ref[i].second->cols() != named[i].second->cols()) {
      throw std::runtime_error("array '" + named[i].first + "' has the wrong shape for its config");
    }
    if (!named[i].second->allFinite()) throw std::runtime_error("array '" + named[i].first + "' is not finite");
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_text_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const std::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace hrm
