#include "toolnet/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace toolnet {

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw std::invalid_argument("Tensor: zero extent in shape " + shape_string(shape));
    n *= e;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_numel(shape_) != data_.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_string(shape_) + " does not match data length " +
                                std::to_string(data_.size()));
  }
}

Tensor::Tensor(std::initializer_list<std::size_t> shape, std::vector<double> data)
    : Tensor(std::vector<std::size_t>(shape), std::move(data)) {}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), v);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::check_finite(const std::string& context) const {
  if (!all_finite()) throw std::runtime_error("non-finite value in " + context);
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f64_array(std::ostream& os, const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &p[i], 8);
    write_u64(os, bits);
  }
}

void read_f64_array(std::istream& is, double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = read_u64(is);
    std::memcpy(&p[i], &bits, 8);
  }
}

constexpr char kMagic[4] = {'T', 'N', 'C', 'K'};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 4);
  std::uint32_t version = 1;
  os.write(reinterpret_cast<const char*>(&version), 4);
  write_u64(os, ckpt.size());
  for (const auto& [name, t] : ckpt) {
    write_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(os, t.ndim());
    for (std::size_t d : t.shape()) write_u64(os, d);
    write_f64_array(os, t.data(), t.numel());
  }
  if (!os) throw std::runtime_error("write failure on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  if (version != 1) throw std::runtime_error("unsupported checkpoint version in " + path);
  std::uint64_t count = read_u64(is);
  Checkpoint ckpt;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t len = read_u64(is);
    std::string name(len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(len));
    std::uint64_t ndim = read_u64(is);
    std::vector<std::size_t> shape(ndim);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(read_u64(is));
      numel *= d;
    }
    std::vector<double> data(numel);
    read_f64_array(is, data.data(), numel);
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    ckpt.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return ckpt;
}

}  // namespace toolnet
