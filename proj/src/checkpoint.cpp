#include "conceptor/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "conceptor/png.hpp"
#include "conceptor/sha256.hpp"

namespace conceptor {

namespace {

constexpr char kMagic[4] = {'C', 'P', 'S', 'M'};

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  const std::uint8_t* take(std::size_t n) {
    if (n > size_ - pos_) throw IntegrityError("checkpoint: truncated");
    const auto* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return *take(1); }
  std::uint32_t u32() {
    const auto* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool done() const { return pos_ == size_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Vocabulary& vocab, const NoiseSchedule& sched,
                                            const MlpDenoiser& model) {
  require(model.frozen(), "checkpoint: model must be frozen");
  require(model.cond_dim() == static_cast<Eigen::Index>(vocab.dim()), "checkpoint: model/vocab dimension mismatch");
  require(model.arch().max_t == sched.steps(), "checkpoint: model/schedule step mismatch");
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(vocab.size()));
  w.u32(static_cast<std::uint32_t>(vocab.dim()));
  w.u32(static_cast<std::uint32_t>(sched.steps()));
  const Matrix& table = vocab.table();
  for (Eigen::Index tok = 0; tok < table.cols(); ++tok)
    for (Eigen::Index k = 0; k < table.rows(); ++k) w.f32(table(k, tok));
  for (double v : sched.alpha_bars()) w.f64(v);
  for (double v : sched.betas()) w.f64(v);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    w.str(vocab.tokens()[i]);
    w.u8(static_cast<std::uint8_t>(vocab.roles()[i]));
  }
  w.u32(static_cast<std::uint32_t>(model.arch().time_dim));
  w.f64(model.arch().signal_scale);
  const auto blocks = model.blocks();
  w.u32(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    w.str(b.name);
    w.u32(static_cast<std::uint32_t>(b.shape.size()));
    for (auto s : b.shape) w.u32(s);
    for (double v : b.values) w.f32(v);
  }
  const Digest digest = sha256(std::span<const std::uint8_t>(w.bytes));
  w.raw(digest.data(), digest.size());
  return std::move(w.bytes);
}

SubjectBundle decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 + 16 + 32) throw IntegrityError("checkpoint: file too short");
  const std::size_t body = bytes.size() - 32;
  const Digest digest = sha256(std::span<const std::uint8_t>(bytes.data(), body));
  if (std::memcmp(digest.data(), bytes.data() + body, 32) != 0)
    throw IntegrityError("checkpoint: SHA-256 mismatch (file corrupted)");
  Reader r(bytes.data(), body);
  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw IntegrityError("checkpoint: bad magic");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw IntegrityError("checkpoint: unsupported version " + std::to_string(version));
  const auto N = r.u32(), d = r.u32(), T = r.u32();
  Matrix table(d, N);
  for (std::uint32_t tok = 0; tok < N; ++tok)
    for (std::uint32_t k = 0; k < d; ++k) table(k, tok) = r.f32();
  std::vector<double> alpha_bar(T + 1);
  for (auto& v : alpha_bar) v = r.f64();
  for (std::uint32_t t = 0; t < T; ++t) r.f64();
  std::vector<std::string> tokens;
  std::vector<TokenRole> roles;
  for (std::uint32_t i = 0; i < N; ++i) {
    tokens.push_back(r.str());
    const auto role = r.u8();
    if (role > static_cast<std::uint8_t>(TokenRole::null)) throw IntegrityError("checkpoint: bad token role");
    roles.push_back(static_cast<TokenRole>(role));
  }
  const auto time_dim = r.u32();
  const double signal_scale = r.f64();
  const auto count = r.u32();
  std::vector<NamedBlock> blocks;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedBlock b;
    b.name = r.str();
    const auto rank = r.u32();
    if (rank < 1 || rank > 2) throw IntegrityError("checkpoint: bad block rank");
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      b.shape.push_back(r.u32());
      n *= b.shape.back();
    }
    if (n * 4 > bytes.size()) throw IntegrityError("checkpoint: truncated");
    b.values.resize(n);
    for (auto& v : b.values) v = r.f32();
    blocks.push_back(std::move(b));
  }
  if (!r.done()) throw IntegrityError("checkpoint: trailing bytes");
  try {
    Vocabulary vocab(std::move(table), std::move(tokens), std::move(roles));
    NoiseSchedule sched(alpha_bar);
    MlpDenoiser model = MlpDenoiser::from_blocks(blocks, d, static_cast<int>(T), alpha_bar, signal_scale);
    if (model.arch().time_dim != static_cast<Eigen::Index>(time_dim))
      throw IntegrityError("checkpoint: time_dim disagrees with w_in width");
    return SubjectBundle{std::move(vocab), std::move(sched), std::move(model)};
  } catch (const ValidationError& e) {
    throw IntegrityError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Vocabulary& vocab, const NoiseSchedule& sched,
                     const MlpDenoiser& model) {
  write_file_atomic(path, encode_checkpoint(vocab, sched, model));
}

SubjectBundle load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace conceptor
