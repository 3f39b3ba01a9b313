#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "amdnet/datagen.hpp"
#include "amdnet/model.hpp"
#include "amdnet/motion_grid.hpp"

namespace amdnet {

// Shortest exact round-trip representation.
std::string format_double(double v);
// Fixed 9-significant-digit formatting for report files.
std::string csv_num(double v);

std::string read_text_file(const std::string& path);   // IoError
void write_text_file(const std::string& path, const std::string& content);

// ---------------------------------------------------------------------------
// Flat "key = value" text config. '#' starts a comment. Reads mark keys as
// consumed so callers can reject unknown keys wholesale.
// ---------------------------------------------------------------------------
class KeyValues {
 public:
  KeyValues() = default;
  static KeyValues parse(const std::string& text);      // ConfigError
  static KeyValues from_file(const std::string& path);  // IoError

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& def) const;
  std::string require_string(const std::string& key) const;  // ConfigError
  double get_double(const std::string& key, double def) const;
  int64_t get_int(const std::string& key, int64_t def) const;
  bool get_bool(const std::string& key, bool def) const;

  // Throws ConfigError naming every key never read.
  void require_all_consumed() const;
  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return kv_;
  }

 private:
  const std::string* find(const std::string& key) const;
  std::vector<std::pair<std::string, std::string>> kv_;
  mutable std::set<std::string> used_;
};

// Shared config keys for GridSpec ("grid.*") and ModelConfig.
GridSpec grid_from_kv(const KeyValues& kv, const GridSpec& defaults);
void grid_to_kv(const GridSpec& g, std::string& out);
ModelConfig model_config_from_kv(const KeyValues& kv,
                                 const ModelConfig& defaults);
void model_config_to_kv(const ModelConfig& cfg, std::string& out);

// ---------------------------------------------------------------------------
// Scene directories: text manifest plus per-frame binary point files
// (little-endian float32 x y z intensity records).
// ---------------------------------------------------------------------------
void save_scene(const SceneSequence& scene, const std::string& dir);
SceneSequence load_scene(const std::string& dir);

// Flat binary motion grid: uint32 nx, ny, channels then float64 planes
// vx, vy, dyn, known.
void save_motion_grid(const MotionGrid& grid, const std::string& path);
MotionGrid load_motion_grid(const std::string& path);

struct DatasetIndex {
  std::vector<std::string> train;
  std::vector<std::string> val;
};
void save_dataset_index(const DatasetIndex& index, const std::string& path);
DatasetIndex load_dataset_index(const std::string& path);  // IoError

// ---------------------------------------------------------------------------
// Checkpoints: versioned text header with the model config and tensor table,
// then raw row-major float64 payload in table order.
// ---------------------------------------------------------------------------
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);  // MissingCheckpoint, IoError

// ---------------------------------------------------------------------------
// CSV assembly with deterministic formatting.
// ---------------------------------------------------------------------------
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void add_row(const std::vector<std::string>& cells);  // ShapeMismatch
  const std::string& str() const { return out_; }
  void write(const std::string& path) const;

 private:
  size_t columns_;
  std::string out_;
};

}  // namespace amdnet
