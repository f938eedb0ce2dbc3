#include "blindsr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "blindsr/errors.hpp"

namespace blindsr {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'B', 'S', 'R', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint64_t kMaxName = 1u << 16;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Input {
 public:
  Input(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <typename T>
  T get() {
    T value{};
    read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
  }

  std::string string(std::uint64_t limit) {
    const auto n = get<std::uint32_t>();
    if (n > limit) fail("string length " + std::to_string(n) + " exceeds limit");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }

  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("unexpected end of file");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError("corrupt checkpoint " + path_ + ": " + what);
  }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return &t.tensor;
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, ck.config_json.size());
    out.write(ck.config_json.data(), static_cast<std::streamsize>(ck.config_json.size()));
    put<std::int64_t>(out, ck.step);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.tensors.size()));
    for (const NamedTensor& t : ck.tensors) {
      put_string(out, t.name);
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t.tensor.dim()));
      for (Index e : t.tensor.shape()) put<std::uint64_t>(out, static_cast<std::uint64_t>(e));
      out.write(reinterpret_cast<const char*>(t.tensor.data().data()),
                static_cast<std::streamsize>(t.tensor.size() * sizeof(double)));
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.seeds.size()));
    for (const auto& [name, value] : ck.seeds) {
      put_string(out, name);
      put<std::uint64_t>(out, value);
    }
    if (!out) throw IoError("failed while writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) throw IoError("cannot open checkpoint " + path.string());
  Input in(stream, path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) in.fail("bad magic");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) in.fail("unsupported version " + std::to_string(version));

  Checkpoint ck;
  const auto config_len = in.get<std::uint64_t>();
  if (config_len > (1u << 24)) in.fail("configuration block too large");
  ck.config_json.resize(config_len);
  in.read(ck.config_json.data(), config_len);
  ck.step = in.get<std::int64_t>();
  if (ck.step < 0) in.fail("negative step");

  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = in.string(kMaxName);
    const auto ndim = in.get<std::uint32_t>();
    if (ndim > 8) in.fail("tensor " + name + " has " + std::to_string(ndim) + " dimensions");
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const auto e = in.get<std::uint64_t>();
      if (e == 0 || e > (1ull << 32) || numel * e > (1ull << 32)) in.fail("tensor " + name + " has bad extents");
      numel *= e;
      shape.push_back(static_cast<Index>(e));
    }
    Eigen::VectorXd data(static_cast<Index>(numel));
    in.read(reinterpret_cast<char*>(data.data()), numel * sizeof(double));
    ck.tensors.push_back({std::move(name), Tensor(shape, std::move(data))});
  }
  const auto seeds = in.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < seeds; ++k) {
    std::string name = in.string(kMaxName);
    ck.seeds.emplace_back(std::move(name), in.get<std::uint64_t>());
  }
  if (stream.peek() != std::char_traits<char>::eof()) in.fail("trailing bytes");
  return ck;
}

}  // namespace blindsr
