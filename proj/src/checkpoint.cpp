#include "pauie/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace pauie::checkpoint {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr std::array<char, 5> kMagic{'P', 'A', 'U', 'I', 'E'};
constexpr std::uint8_t kDtypeF64 = 0;
constexpr std::uint8_t kKindParameter = 0;
constexpr std::uint8_t kKindBuffer = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  }
  template <class T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void string(const std::string& s) {
    pod<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  void tensor(std::uint8_t kind, const std::string& name, const nn::Tensor& t) {
    pod(kind);
    string(name);
    pod(kDtypeF64);
    pod<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) pod<std::uint64_t>(d);
    bytes(t.ptr(), t.numel() * sizeof(double));
  }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed for " + path_.string());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open " + path.string());
  }
  template <class T>
  T pod() {
    T v{};
    bytes(&v, sizeof(T));
    return v;
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw IoError("truncated checkpoint " + path_.string());
  }
  std::string string() {
    const auto n = pod<std::uint64_t>();
    if (n > (1u << 26)) throw IoError("corrupt string length in " + path_.string());
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

}  // namespace

void save(const std::filesystem::path& path, const net::PaUieNet& model, std::uint64_t iteration) {
  Writer w(path);
  w.bytes(kMagic.data(), kMagic.size());
  w.pod(kFormatVersion);
  w.pod(iteration);
  w.string(net::to_json(model.config()));
  const auto& store = model.store();
  w.pod<std::uint64_t>(store.parameters().size());
  w.pod<std::uint64_t>(store.buffers().size());
  for (const auto& e : store.parameters()) w.tensor(kKindParameter, e.name, e.var.value());
  for (const auto& b : store.buffers()) w.tensor(kKindBuffer, b.name, b.value);
  w.finish();
}

Checkpoint load(const std::filesystem::path& path) {
  Reader r(path);
  std::array<char, 5> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw IoError(path.string() + " is not a checkpoint (bad magic)");
  const auto version = r.pod<std::uint32_t>();
  if (version != kFormatVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.iteration = r.pod<std::uint64_t>();
  ck.config = net::config_from_json(r.string());
  const auto n_params = r.pod<std::uint64_t>();
  const auto n_buffers = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_params + n_buffers; ++i) {
    const auto kind = r.pod<std::uint8_t>();
    const std::string name = r.string();
    const auto dtype = r.pod<std::uint8_t>();
    if (dtype != kDtypeF64) throw IoError("unsupported dtype for " + name);
    const auto ndim = r.pod<std::uint32_t>();
    if (ndim > 8) throw IoError("corrupt rank for " + name);
    nn::Shape shape(ndim);
    for (auto& d : shape) d = r.pod<std::uint64_t>();
    nn::Tensor t(shape);
    r.bytes(t.ptr(), t.numel() * sizeof(double));
    const bool expect_param = i < n_params;
    if ((kind == kKindParameter) != expect_param) throw IoError("corrupt section order at " + name);
    if (expect_param) {
      ck.store.add_parameter(name, std::move(t));
    } else {
      ck.store.add_buffer(name, std::move(t));
    }
  }
  if (!r.at_end()) throw IoError(path.string() + ": trailing bytes after checkpoint payload");
  return ck;
}

net::PaUieNet load_model(const std::filesystem::path& path, std::uint64_t* iteration) {
  auto ck = load(path);
  if (iteration) *iteration = ck.iteration;
  net::PaUieNet model(ck.config, std::move(ck.store));
  model.set_mode(net::Mode::kEval);
  return model;
}

}  // namespace pauie::checkpoint
