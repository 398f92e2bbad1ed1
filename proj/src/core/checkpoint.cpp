#include "tap/core/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <limits>

#include "tap/binary_io.hpp"
#include "tap/errors.hpp"

namespace tap::io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace tap::io

namespace tap::core {
namespace {
constexpr std::string_view kMagic = "TAPC";
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::string encode_checkpoint(const ParamStore& params) {
  io::ByteWriter w;
  w.raw(kMagic);
  w.uint<std::uint32_t>(kVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max())
      throw ContractError("checkpoint: parameter name too long: " + e.name);
    const Tensor& t = *e.tensor;
    if (t.rank() > std::numeric_limits<std::uint8_t>::max())
      throw ContractError("checkpoint: rank too large for " + e.name);
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    w.raw(e.name);
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t extent : t.shape()) w.uint<std::uint32_t>(static_cast<std::uint32_t>(extent));
    for (double v : t.values()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

ParamStore decode_checkpoint(const std::string& bytes) {
  io::ByteReader r(bytes, "checkpoint");
  if (r.raw(4) != kMagic) throw FormatError("checkpoint: bad magic");
  const auto version = r.uint<std::uint32_t>();
  if (version != kVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = r.uint<std::uint32_t>();
  ParamStore store;
  for (std::uint32_t n = 0; n < count; ++n) {
    const auto name_len = r.uint<std::uint16_t>();
    std::string name(r.raw(name_len));
    const auto rank = r.uint<std::uint8_t>();
    Shape shape(rank);
    for (auto& extent : shape) extent = r.uint<std::uint32_t>();
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = static_cast<double>(r.f32());
    store.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return store;
}

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(params));
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace tap::core
