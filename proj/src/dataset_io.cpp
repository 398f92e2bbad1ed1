#include "tap/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "tap/binary_io.hpp"
#include "tap/errors.hpp"

namespace tap::data {
namespace {

constexpr std::string_view kMagic = "SEQD";
constexpr std::uint32_t kVersion = 1;
constexpr const char* kSplitDirs[] = {"meta_train", "meta_val", "meta_test"};

void write_split(const std::filesystem::path& dir, const ClassStore& store, std::size_t dim) {
  std::filesystem::create_directories(dir);
  for (const auto& [id, seqs] : store) {
    write_class_file(dir / ("class_" + std::to_string(id) + ".seq"), seqs, dim);
  }
}

ClassStore read_split(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("dataset split directory '" + dir.string() + "' does not exist");
  }
  ClassStore store;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".seq") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const auto id = class_id_from_filename(file);
    store.emplace(id, read_class_file(file));
  }
  return store;
}

}  // namespace

std::string encode_class_file(const std::vector<RawSequence>& sequences, std::size_t dim) {
  io::ByteWriter w;
  w.raw(kMagic);
  w.uint<std::uint32_t>(kVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(dim));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(sequences.size()));
  for (const auto& seq : sequences) {
    if (seq.dim != dim) throw DimensionError("class file: sequence dim disagrees with file dim");
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(seq.length));
    for (double v : seq.frames) w.f32(static_cast<float>(v));
  }
  return w.take();
}

std::vector<RawSequence> decode_class_file(const std::string& bytes, std::uint32_t class_id) {
  io::ByteReader r(bytes, "class file");
  if (r.raw(4) != kMagic) throw FormatError("class file: bad magic");
  const auto version = r.uint<std::uint32_t>();
  if (version != kVersion)
    throw FormatError("class file: unsupported version " + std::to_string(version));
  const auto dim = r.uint<std::uint32_t>();
  const auto count = r.uint<std::uint32_t>();
  std::vector<RawSequence> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    RawSequence seq;
    seq.dim = dim;
    seq.length = r.uint<std::uint32_t>();
    if (seq.length == 0) throw FormatError("class file: empty sequence");
    seq.frames.resize(seq.length * dim);
    for (double& v : seq.frames) v = static_cast<double>(r.f32());
    seq.class_id = class_id;
    seq.instance_id = make_instance_id(class_id, i);
    out.push_back(std::move(seq));
  }
  if (!r.done()) throw FormatError("class file: trailing bytes");
  return out;
}

void write_class_file(const std::filesystem::path& path, const std::vector<RawSequence>& sequences,
                      std::size_t dim) {
  io::write_file(path, encode_class_file(sequences, dim));
}

std::vector<RawSequence> read_class_file(const std::filesystem::path& path) {
  return decode_class_file(io::read_file(path), class_id_from_filename(path));
}

std::uint32_t class_id_from_filename(const std::filesystem::path& path) {
  const std::string stem = path.stem().string();
  const std::string prefix = "class_";
  std::uint32_t id = 0;
  if (stem.rfind(prefix, 0) != 0 || path.extension() != ".seq") {
    throw FormatError("'" + path.filename().string() + "' is not a class_<id>.seq file");
  }
  const char* first = stem.data() + prefix.size();
  const char* last = stem.data() + stem.size();
  auto [ptr, ec] = std::from_chars(first, last, id);
  if (ec != std::errc() || ptr != last || first == last) {
    throw FormatError("'" + path.filename().string() + "' has no numeric class id");
  }
  return id;
}

void write_dataset(const std::filesystem::path& dir, const MetaSplits& splits, std::size_t dim,
                   const std::vector<std::string>& manifest_lines) {
  try {
    std::filesystem::create_directories(dir);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError(e.what());
  }
  const ClassStore* stores[] = {&splits.train, &splits.val, &splits.test};
  for (int s = 0; s < 3; ++s) {
    try {
      write_split(dir / kSplitDirs[s], *stores[s], dim);
    } catch (const std::filesystem::filesystem_error& e) {
      throw IoError(e.what());
    }
  }
  std::string manifest;
  for (const auto& line : manifest_lines) manifest += line + "\n";
  io::write_file(dir / "manifest.txt", manifest);
}

MetaSplits read_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("dataset directory '" + dir.string() + "' does not exist");
  }
  MetaSplits out;
  out.train = read_split(dir / kSplitDirs[0]);
  out.val = read_split(dir / kSplitDirs[1]);
  out.test = read_split(dir / kSplitDirs[2]);
  return out;
}

}  // namespace tap::data
