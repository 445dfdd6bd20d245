#include "gradibd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gradibd/error.hpp"

namespace gradibd {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'G', 'R', 'A', 'D', 'I', 'B', 'D', '\0'};

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    out_.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_ += s;
  }
  void matrix(const ad::Matrix& m) {
    pod<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    pod<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) pod(m(r, c));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : data_(bytes) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  ad::Matrix matrix() {
    const auto rows = pod<std::uint64_t>();
    const auto cols = pod<std::uint64_t>();
    if (cols != 0 && rows > (data_.size() - pos_) / sizeof(double) / cols) truncated();
    ad::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = pod<double>();
    return m;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) truncated();
  }
  [[noreturn]] static void truncated() { fail(ErrorCode::FormatError, "checkpoint is truncated"); }

  const std::string& data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  for (char c : kMagic) w.pod(c);
  w.pod(kCheckpointVersion);
  w.str(ckpt.config.to_text());
  w.pod<std::uint64_t>(ckpt.n_codes);
  w.pod<std::int32_t>(ckpt.fold);
  w.pod<std::int32_t>(ckpt.best_epoch);

  const auto names = ckpt.params.names();
  const auto tensors = ckpt.params.tensors();
  w.pod<std::uint64_t>(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    w.str(names[i]);
    w.matrix(*tensors[i]);
  }

  const auto& opt = ckpt.optimizer;
  w.pod(opt.lr);
  w.pod(opt.beta1);
  w.pod(opt.beta2);
  w.pod(opt.eps);
  w.pod<std::uint64_t>(opt.step);
  w.pod<std::uint64_t>(opt.first_moment.size());
  for (std::size_t i = 0; i < opt.first_moment.size(); ++i) {
    w.matrix(opt.first_moment[i]);
    w.matrix(opt.second_moment[i]);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  for (char c : kMagic) {
    if (r.pod<char>() != c) fail(ErrorCode::FormatError, "not a checkpoint file");
  }
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::FormatError, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config = RunConfig::parse(r.str());
  ckpt.n_codes = r.pod<std::uint64_t>();
  ckpt.fold = r.pod<std::int32_t>();
  ckpt.best_epoch = r.pod<std::int32_t>();

  ckpt.params = ModelParams::init(ckpt.config.model, ckpt.n_codes, 0);
  auto refs = ckpt.params.refs();
  const auto n_tensors = r.pod<std::uint64_t>();
  if (n_tensors != refs.size()) fail(ErrorCode::FormatError, "checkpoint tensor count does not match its config");
  for (auto& ref : refs) {
    const auto name = r.str();
    if (name != ref.name) fail(ErrorCode::FormatError, "expected tensor '" + ref.name + "', found '" + name + "'");
    auto m = r.matrix();
    if (m.rows() != ref.value->rows() || m.cols() != ref.value->cols()) {
      fail(ErrorCode::FormatError, "tensor '" + name + "' has the wrong shape");
    }
    *ref.value = std::move(m);
  }

  auto& opt = ckpt.optimizer;
  opt.lr = r.pod<double>();
  opt.beta1 = r.pod<double>();
  opt.beta2 = r.pod<double>();
  opt.eps = r.pod<double>();
  opt.step = r.pod<std::uint64_t>();
  const auto n_moments = r.pod<std::uint64_t>();
  if (n_moments != 0 && n_moments != refs.size()) fail(ErrorCode::FormatError, "optimizer state size mismatch");
  for (std::uint64_t i = 0; i < n_moments; ++i) {
    opt.first_moment.push_back(r.matrix());
    opt.second_moment.push_back(r.matrix());
  }
  if (!r.done()) fail(ErrorCode::FormatError, "trailing bytes after checkpoint");
  return ckpt;
}

std::vector<Checkpoint> fold_checkpoints(const CvResult& cv, const RunConfig& config, std::size_t n_codes) {
  std::vector<Checkpoint> out;
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    const auto& fold = cv.folds[f];
    out.push_back({config, n_codes, static_cast<int>(f), fold.best_epoch, fold.params, fold.optimizer});
  }
  return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  const auto bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace gradibd
