#include "listrecon/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace listrecon {

namespace {

// All on-disk numbers are little-endian; this code assumes a little-endian
// host (x86/aarch64) and round-trips through memcpy to stay alias-safe.
template <class T>
void put(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& off, const std::string& what) {
  if (off + sizeof(T) > in.size()) throw IoError("truncated " + what);
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create file: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write: " + path);
}

void hash_bytes(std::uint64_t& h, const void* p, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ull;
  }
}

template <class T>
void hash_value(std::uint64_t& h, T v) {
  hash_bytes(h, &v, sizeof(T));
}

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                      std::uint64_t seed) {
  std::uint64_t h = seed;
  hash_bytes(h, bytes.data(), bytes.size());
  return h;
}

std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

std::uint64_t geometry_hash(const ScannerGeometry& geom, const TofSpec& tof,
                            const GridSpec& grid) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  hash_value(h, static_cast<std::int32_t>(geom.n_modules));
  hash_value(h, static_cast<std::int32_t>(geom.crystals_per_module));
  hash_value(h, geom.ring_radius);
  hash_value(h, geom.crystal_width);
  hash_value(h, tof.fwhm_ps);
  hash_value(h, static_cast<std::int32_t>(tof.n_bins));
  hash_value(h, tof.bin_width);
  hash_value(h, static_cast<std::int32_t>(grid.width));
  hash_value(h, static_cast<std::int32_t>(grid.height));
  hash_value(h, grid.spacing);
  return h;
}

void write_lmev(const std::string& path, const EventList& events,
                std::uint64_t geom_hash, std::uint16_t n_bins) {
  std::string out;
  out.reserve(26 + events.size() * 10);
  out.append("LMEV", 4);
  put<std::uint32_t>(out, 1);
  put<std::uint64_t>(out, events.size());
  put<std::uint64_t>(out, geom_hash);
  put<std::uint16_t>(out, n_bins);
  for (const Event& e : events) {
    put<std::uint16_t>(out, e.det_a);
    put<std::uint16_t>(out, e.det_b);
    put<std::uint16_t>(out, e.tof_bin);
    put<float>(out, e.multiplier);
  }
  spit(path, out);
}

LmevData read_lmev(const std::string& path) {
  std::string in = slurp(path);
  if (in.size() < 4 || in.compare(0, 4, "LMEV") != 0)
    throw IoError("bad magic in event file: " + path);
  std::size_t off = 4;
  LmevData data;
  data.version = take<std::uint32_t>(in, off, "event file header");
  if (data.version != 1)
    throw IoError("unsupported event file version " +
                  std::to_string(data.version) + ": " + path);
  std::uint64_t n = take<std::uint64_t>(in, off, "event file header");
  data.geom_hash = take<std::uint64_t>(in, off, "event file header");
  data.n_bins = take<std::uint16_t>(in, off, "event file header");
  if (in.size() - off != n * 10)
    throw IoError("event record section has wrong size: " + path);
  data.events.resize(n);
  for (std::uint64_t t = 0; t < n; ++t) {
    Event& e = data.events[t];
    e.det_a = take<std::uint16_t>(in, off, "event record");
    e.det_b = take<std::uint16_t>(in, off, "event record");
    e.tof_bin = take<std::uint16_t>(in, off, "event record");
    e.multiplier = take<float>(in, off, "event record");
    if (e.tof_bin >= data.n_bins)
      throw IoError("event TOF bin out of range in " + path);
    if (!(e.multiplier >= 0.0f))
      throw IoError("negative or NaN event multiplier in " + path);
  }
  return data;
}

void write_img(const std::string& path, const Image2D& img) {
  std::string out;
  out.reserve(20 + img.size() * 4);
  out.append("IMG2", 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(img.width()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(img.height()));
  put<double>(out, img.grid().spacing);
  for (double v : img.values()) put<float>(out, static_cast<float>(v));
  spit(path, out);
}

Image2D read_img(const std::string& path) {
  std::string in = slurp(path);
  if (in.size() < 4 || in.compare(0, 4, "IMG2") != 0)
    throw IoError("bad magic in image file: " + path);
  std::size_t off = 4;
  auto p = take<std::uint32_t>(in, off, "image header");
  auto q = take<std::uint32_t>(in, off, "image header");
  double spacing = take<double>(in, off, "image header");
  if (p == 0 || q == 0 || !(spacing > 0.0))
    throw IoError("degenerate image header: " + path);
  if (in.size() - off != static_cast<std::size_t>(p) * q * 4)
    throw IoError("image value section has wrong size: " + path);
  Image2D img(GridSpec{static_cast<int>(p), static_cast<int>(q), spacing});
  for (std::size_t j = 0; j < img.size(); ++j) {
    float f = take<float>(in, off, "image value");
    if (!std::isfinite(f)) throw IoError("non-finite image value: " + path);
    img[j] = f;
  }
  return img;
}

void write_pgm16(const std::string& path, const Image2D& img) {
  double lo = img[0], hi = img[0];
  for (double v : img.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;
  std::string out = "P5\n" + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n65535\n";
  out.reserve(out.size() + img.size() * 2);
  for (double v : img.values()) {
    auto g = static_cast<std::uint32_t>(std::lround((v - lo) * scale));
    if (g > 65535) g = 65535;
    // PGM is big-endian for maxval > 255.
    out.push_back(static_cast<char>(g >> 8));
    out.push_back(static_cast<char>(g & 0xff));
  }
  spit(path, out);
}

void write_rois(const std::string& path, const RoiSpec& rois) {
  nlohmann::json j;
  j["targets"] = rois.targets;
  j["background"] = rois.background;
  j["a_true"] = rois.a_true;
  j["b_true"] = rois.b_true;
  spit(path, j.dump(2) + "\n");
}

RoiSpec read_rois(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("bad ROI file " + path + ": " + e.what());
  }
  RoiSpec rois;
  try {
    rois.targets = j.at("targets").get<std::vector<std::vector<int>>>();
    rois.background = j.at("background").get<std::vector<std::vector<int>>>();
    rois.a_true = j.at("a_true").get<double>();
    rois.b_true = j.at("b_true").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad ROI file " + path + ": " + e.what());
  }
  return rois;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) buf_ += ',';
    buf_ += header[i];
  }
  buf_ += '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_)
    throw DimensionError("CSV row width does not match header");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) buf_ += ',';
    buf_ += cells[i];
  }
  buf_ += '\n';
}

void CsvWriter::save(const std::string& path) const { spit(path, buf_); }

std::string CsvWriter::text() const { return buf_; }

std::string read_text_file(const std::string& path) { return slurp(path); }

void write_text_file(const std::string& path, const std::string& text) {
  spit(path, text);
}

}  // namespace listrecon
