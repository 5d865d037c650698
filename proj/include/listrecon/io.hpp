#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "listrecon/geometry.hpp"
#include "listrecon/image.hpp"
#include "listrecon/projector.hpp"

namespace listrecon {

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t fnv1a64(const std::string& s);

/// Hash tying an event file to the physics it was produced with: scanner,
/// TOF discretisation and pixel grid, hashed over their raw field bytes in a
/// fixed order.
std::uint64_t geometry_hash(const ScannerGeometry& geom, const TofSpec& tof,
                            const GridSpec& grid);

/// List-mode event file ("LMEV"): little-endian header
///   magic 'LMEV' | version u32 | N u64 | geometry hash u64 | n_bins u16
/// followed by N packed 10-byte records
///   det_a u16 | det_b u16 | tof_bin u16 | multiplier f32.
struct LmevData {
  std::uint32_t version = 1;
  std::uint64_t geom_hash = 0;
  std::uint16_t n_bins = 0;
  EventList events;
};

void write_lmev(const std::string& path, const EventList& events,
                std::uint64_t geom_hash, std::uint16_t n_bins);
LmevData read_lmev(const std::string& path);

/// Image file ("IMG2"): little-endian header
///   magic 'IMG2' | P u32 | Q u32 | spacing f64
/// followed by P*Q f32 values, row-major.
void write_img(const std::string& path, const Image2D& img);
Image2D read_img(const std::string& path);

/// 16-bit binary PGM preview, min-max scaled (constant images map to 0).
void write_pgm16(const std::string& path, const Image2D& img);

/// Regions of interest for the metric suite: pixel-index masks plus the
/// ground-truth target/background uptake values.  Serialized as JSON.
struct RoiSpec {
  std::vector<std::vector<int>> targets;
  std::vector<std::vector<int>> background;
  double a_true = 0.0;
  double b_true = 0.0;
};

void write_rois(const std::string& path, const RoiSpec& rois);
RoiSpec read_rois(const std::string& path);

/// Tiny CSV emitter: quotes nothing, callers keep cells comma-free.
class CsvWriter {
public:
  explicit CsvWriter(std::vector<std::string> header);
  void row(const std::vector<std::string>& cells);
  void save(const std::string& path) const;
  std::string text() const;

private:
  std::size_t width_;
  std::string buf_;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace listrecon
