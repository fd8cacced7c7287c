#include "arcnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "arcnet/errors.hpp"
#include "arcnet/params.hpp"

namespace arcnet {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'R', 'C', 'N', 'E', 'T', 'C', 'K'};

template <typename U>
void put(std::ostream& out, U v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::istream& in) {
  U v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(U))) throw ValidationError("checkpoint: truncated file");
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n) {
  if (n > (std::uint64_t{1} << 32)) throw ValidationError("checkpoint: implausible field length");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw ValidationError("checkpoint: truncated file");
  return s;
}

std::string hex64(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const NamedArray& Checkpoint::at(const std::string& name) const {
  if (const auto* t = find(name)) return *t;
  throw ValidationError("checkpoint: missing tensor '" + name + "'");
}

void write_checkpoint(const Checkpoint& ck, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string meta = ck.meta.dump();
  put<std::uint64_t>(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put<std::uint64_t>(out, ck.tensors.size());
  for (const auto& t : ck.tensors) {
    if (shape_size(t.shape) != t.data.size()) {
      throw ValidationError("checkpoint: tensor '" + t.name + "' data does not match its shape");
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto e : t.shape) put<std::uint64_t>(out, e);
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!out) throw ValidationError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw ValidationError("checkpoint: bad magic (not an arcnet checkpoint)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  const std::string meta = get_bytes(in, get<std::uint64_t>(in));
  try {
    ck.meta = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray t;
    t.name = get_bytes(in, get<std::uint32_t>(in));
    const auto rank = get<std::uint32_t>(in);
    if (rank == 0 || rank > 8) throw ValidationError("checkpoint: tensor '" + t.name + "' has invalid rank");
    for (std::uint32_t r = 0; r < rank; ++r) t.shape.push_back(get<std::uint64_t>(in));
    t.data.resize(shape_size(t.shape));
    if (!in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)))) {
      throw ValidationError("checkpoint: truncated tensor '" + t.name + "'");
    }
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint " + path.string());
  write_checkpoint(ck, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return hex64(fnv1a(buf.str()));
}

std::string json_hash(const nlohmann::json& j) { return hex64(fnv1a(j.dump())); }

}  // namespace arcnet
