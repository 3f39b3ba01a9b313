#include "amdnet/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "amdnet/errors.hpp"

namespace fs = std::filesystem;

namespace amdnet {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("short write to " + path);
}

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' is not a number: '" + v + "'");
  }
}

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int64_t n = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' is not an integer: '" + v + "'");
  }
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    kv.set(key, value);
  }
  return kv;
}

KeyValues KeyValues::from_file(const std::string& path) {
  return parse(read_text_file(path));
}

void KeyValues::set(const std::string& key, const std::string& value) {
  for (auto& e : kv_)
    if (e.first == key) {
      e.second = value;
      return;
    }
  kv_.emplace_back(key, value);
}

const std::string* KeyValues::find(const std::string& key) const {
  for (const auto& e : kv_)
    if (e.first == key) {
      used_.insert(key);
      return &e.second;
    }
  return nullptr;
}

bool KeyValues::has(const std::string& key) const {
  return find(key) != nullptr;
}

std::string KeyValues::get_string(const std::string& key,
                                  const std::string& def) const {
  const std::string* v = find(key);
  return v ? *v : def;
}

std::string KeyValues::require_string(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw ConfigError("missing required key '" + key + "'");
  return *v;
}

double KeyValues::get_double(const std::string& key, double def) const {
  const std::string* v = find(key);
  return v ? parse_double(key, *v) : def;
}

int64_t KeyValues::get_int(const std::string& key, int64_t def) const {
  const std::string* v = find(key);
  return v ? parse_int(key, *v) : def;
}

bool KeyValues::get_bool(const std::string& key, bool def) const {
  const std::string* v = find(key);
  if (!v) return def;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw ConfigError("key '" + key + "' is not a boolean: '" + *v + "'");
}

void KeyValues::require_all_consumed() const {
  std::string stray;
  for (const auto& e : kv_)
    if (!used_.count(e.first)) stray += (stray.empty() ? "" : ", ") + e.first;
  if (!stray.empty()) throw ConfigError("unknown keys: " + stray);
}

GridSpec grid_from_kv(const KeyValues& kv, const GridSpec& defaults) {
  GridSpec g = defaults;
  g.x_min = kv.get_double("grid.x_min", g.x_min);
  g.y_min = kv.get_double("grid.y_min", g.y_min);
  g.z_min = kv.get_double("grid.z_min", g.z_min);
  g.cell_size_xy = kv.get_double("grid.cell_size_xy", g.cell_size_xy);
  g.voxel_size_z = kv.get_double("grid.voxel_size_z", g.voxel_size_z);
  g.nx = static_cast<int>(kv.get_int("grid.nx", g.nx));
  g.ny = static_cast<int>(kv.get_int("grid.ny", g.ny));
  g.nz = static_cast<int>(kv.get_int("grid.nz", g.nz));
  g.validate();
  return g;
}

void grid_to_kv(const GridSpec& g, std::string& out) {
  out += "grid.x_min = " + format_double(g.x_min) + "\n";
  out += "grid.y_min = " + format_double(g.y_min) + "\n";
  out += "grid.z_min = " + format_double(g.z_min) + "\n";
  out += "grid.cell_size_xy = " + format_double(g.cell_size_xy) + "\n";
  out += "grid.voxel_size_z = " + format_double(g.voxel_size_z) + "\n";
  out += "grid.nx = " + std::to_string(g.nx) + "\n";
  out += "grid.ny = " + std::to_string(g.ny) + "\n";
  out += "grid.nz = " + std::to_string(g.nz) + "\n";
}

ModelConfig model_config_from_kv(const KeyValues& kv,
                                 const ModelConfig& defaults) {
  ModelConfig cfg = defaults;
  cfg.variant =
      variant_from_name(kv.get_string("variant", variant_name(cfg.variant)));
  cfg.p = static_cast<int>(kv.get_int("p", cfg.p));
  cfg.alpha = kv.get_double("alpha", cfg.alpha);
  cfg.beta = kv.get_double("beta", cfg.beta);
  cfg.theta = kv.get_double("theta", cfg.theta);
  cfg.tau = kv.get_double("tau", cfg.tau);
  cfg.base_channels =
      static_cast<int>(kv.get_int("base_channels", cfg.base_channels));
  cfg.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<int64_t>(cfg.seed)));
  cfg.seg_all_cells = kv.get_bool("seg_all_cells", cfg.seg_all_cells);
  cfg.grid = grid_from_kv(kv, cfg.grid);
  cfg.validate();
  return cfg;
}

void model_config_to_kv(const ModelConfig& cfg, std::string& out) {
  out += "variant = " + variant_name(cfg.variant) + "\n";
  out += "p = " + std::to_string(cfg.p) + "\n";
  out += "alpha = " + format_double(cfg.alpha) + "\n";
  out += "beta = " + format_double(cfg.beta) + "\n";
  out += "theta = " + format_double(cfg.theta) + "\n";
  out += "tau = " + format_double(cfg.tau) + "\n";
  out += "base_channels = " + std::to_string(cfg.base_channels) + "\n";
  out += "seed = " + std::to_string(cfg.seed) + "\n";
  out += std::string("seg_all_cells = ") +
         (cfg.seg_all_cells ? "true" : "false") + "\n";
  grid_to_kv(cfg.grid, out);
}

namespace {

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("truncated " + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

float read_f32(std::istream& in, const std::string& what) {
  const uint32_t bits = read_u32(in, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

std::string frame_file(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04d.bin", i);
  return buf;
}

}  // namespace

void save_scene(const SceneSequence& scene, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());

  std::string m = "amdnet-scene v1\n";
  grid_to_kv(scene.grid, m);
  m += "frames = " + std::to_string(scene.frames.size()) + "\n";
  for (size_t i = 0; i < scene.frames.size(); ++i)
    m += "timestamp " + std::to_string(i) + " = " +
         format_double(scene.frames[i].timestamp) + "\n";
  for (size_t i = 0; i < scene.frames.size(); ++i) {
    const Transform3& t = scene.frames[i].pose;
    m += "pose " + std::to_string(i) + " =";
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m += " " + format_double(t.rotation().m[r][c]);
      const double tr =
          r == 0 ? t.translation().x
                 : (r == 1 ? t.translation().y : t.translation().z);
      m += " " + format_double(tr);
    }
    m += "\n";
  }
  m += "tracks = " + std::to_string(scene.tracks.size()) + "\n";
  for (size_t j = 0; j < scene.tracks.size(); ++j) {
    const BoxTrack& t = scene.tracks[j];
    m += "track " + std::to_string(j) + " = " + std::to_string(t.id) + " " +
         shape_name(t.shape) + " " + std::to_string(t.states.size()) + "\n";
    for (size_t i = 0; i < t.states.size(); ++i) {
      const BoxState& s = t.states[i];
      m += "state " + std::to_string(j) + " " + std::to_string(i) + " =";
      for (double v : {s.center.x, s.center.y, s.center.z, s.extents.x,
                       s.extents.y, s.extents.z, s.yaw, s.velocity.x,
                       s.velocity.y})
        m += " " + format_double(v);
      m += "\n";
    }
  }
  write_text_file(dir + "/manifest.txt", m);

  for (size_t i = 0; i < scene.frames.size(); ++i) {
    const PointCloud& cloud = scene.frames[i].cloud;
    std::ofstream out(dir + "/" + frame_file(static_cast<int>(i)),
                      std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write points for frame " +
                            std::to_string(i) + " in " + dir);
    write_u32(out, static_cast<uint32_t>(cloud.points.size()));
    for (size_t k = 0; k < cloud.points.size(); ++k) {
      write_f32(out, static_cast<float>(cloud.points[k].x));
      write_f32(out, static_cast<float>(cloud.points[k].y));
      write_f32(out, static_cast<float>(cloud.points[k].z));
      write_f32(out, k < cloud.intensity.size()
                         ? static_cast<float>(cloud.intensity[k])
                         : 0.0f);
    }
    if (!out) throw IoError("short point write in " + dir);
  }
}

namespace {

struct ManifestReader {
  std::istringstream in;
  int lineno = 0;

  explicit ManifestReader(const std::string& text) : in(text) {}

  std::string next_line() {
    std::string line;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (!t.empty()) return t;
    }
    throw IoError("manifest truncated at line " + std::to_string(lineno));
  }

  // Expects "<prefix> = <payload>"; returns the payload.
  std::string expect(const std::string& prefix) {
    const std::string line = next_line();
    if (line.compare(0, prefix.size(), prefix) != 0 ||
        line.size() <= prefix.size() ||
        trim(line.substr(prefix.size())).empty() ||
        trim(line.substr(prefix.size()))[0] != '=')
      throw IoError("manifest line " + std::to_string(lineno) +
                    ": expected '" + prefix + " = ...', got '" + line + "'");
    const std::string rest = trim(line.substr(prefix.size()));
    return trim(rest.substr(1));
  }
};

}  // namespace

SceneSequence load_scene(const std::string& dir) {
  const std::string text = read_text_file(dir + "/manifest.txt");
  ManifestReader r(text);
  if (r.next_line() != "amdnet-scene v1")
    throw IoError("bad manifest magic in " + dir);

  KeyValues grid_kv;
  for (int i = 0; i < 8; ++i) {
    const std::string line = r.next_line();
    const size_t eq = line.find('=');
    if (eq == std::string::npos || line.compare(0, 5, "grid.") != 0)
      throw IoError("manifest grid block malformed in " + dir);
    grid_kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  SceneSequence scene;
  scene.grid = grid_from_kv(grid_kv, GridSpec{});

  const int n = static_cast<int>(parse_int("frames", r.expect("frames")));
  if (n < 0) throw IoError("negative frame count in " + dir);
  scene.frames.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    scene.frames[static_cast<size_t>(i)].timestamp = parse_double(
        "timestamp", r.expect("timestamp " + std::to_string(i)));
  for (int i = 0; i < n; ++i) {
    std::istringstream ps(r.expect("pose " + std::to_string(i)));
    double v[12];
    for (double& x : v)
      if (!(ps >> x)) throw IoError("pose " + std::to_string(i) +
                                    " malformed in " + dir);
    Mat3 rot;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) rot.m[a][b] = v[a * 4 + b];
    scene.frames[static_cast<size_t>(i)].pose =
        Transform3(rot, {v[3], v[7], v[11]});
  }

  const int m = static_cast<int>(parse_int("tracks", r.expect("tracks")));
  scene.tracks.resize(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) {
    std::istringstream ts(r.expect("track " + std::to_string(j)));
    int id = 0, nstates = 0;
    std::string shape;
    if (!(ts >> id >> shape >> nstates))
      throw IoError("track " + std::to_string(j) + " malformed in " + dir);
    BoxTrack& track = scene.tracks[static_cast<size_t>(j)];
    track.id = id;
    track.shape = shape_from_name(shape);
    track.states.resize(static_cast<size_t>(nstates));
    for (int i = 0; i < nstates; ++i) {
      std::istringstream ss(
          r.expect("state " + std::to_string(j) + " " + std::to_string(i)));
      double v[9];
      for (double& x : v)
        if (!(ss >> x))
          throw IoError("state " + std::to_string(j) + " " +
                        std::to_string(i) + " malformed in " + dir);
      BoxState& st = track.states[static_cast<size_t>(i)];
      st.center = {v[0], v[1], v[2]};
      st.extents = {v[3], v[4], v[5]};
      st.yaw = v[6];
      st.velocity = {v[7], v[8]};
    }
  }

  for (int i = 0; i < n; ++i) {
    const std::string path = dir + "/" + frame_file(i);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    const uint32_t count = read_u32(in, path);
    PointCloud& cloud = scene.frames[static_cast<size_t>(i)].cloud;
    cloud.points.resize(count);
    cloud.intensity.resize(count);
    for (uint32_t k = 0; k < count; ++k) {
      cloud.points[k].x = read_f32(in, path);
      cloud.points[k].y = read_f32(in, path);
      cloud.points[k].z = read_f32(in, path);
      cloud.intensity[k] = read_f32(in, path);
    }
  }
  return scene;
}

void save_motion_grid(const MotionGrid& grid, const std::string& path) {
  if (grid.velocity.ndim() != 3 || grid.velocity.dim(0) != 2)
    throw ShapeMismatch("motion grid velocity [2,ny,nx]");
  const int ny = grid.velocity.dim(1), nx = grid.velocity.dim(2);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  write_u32(out, static_cast<uint32_t>(nx));
  write_u32(out, static_cast<uint32_t>(ny));
  write_u32(out, 4);
  auto plane = [&](const double* p) {
    out.write(reinterpret_cast<const char*>(p),
              static_cast<std::streamsize>(sizeof(double)) * ny * nx);
  };
  plane(grid.velocity.plane(0));
  plane(grid.velocity.plane(1));
  plane(grid.dyn.data());
  plane(grid.known.data());
  if (!out) throw IoError("short grid write to " + path);
}

MotionGrid load_motion_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  const int nx = static_cast<int>(read_u32(in, path));
  const int ny = static_cast<int>(read_u32(in, path));
  const uint32_t channels = read_u32(in, path);
  if (channels != 4) throw IoError("unexpected channel count in " + path);
  MotionGrid g;
  g.velocity = Tensor({2, ny, nx});
  g.dyn = Tensor({1, ny, nx});
  g.known = Tensor({1, ny, nx});
  auto plane = [&](double* p) {
    in.read(reinterpret_cast<char*>(p),
            static_cast<std::streamsize>(sizeof(double)) * ny * nx);
    if (!in) throw IoError("truncated grid " + path);
  };
  plane(g.velocity.plane(0));
  plane(g.velocity.plane(1));
  plane(g.dyn.data());
  plane(g.known.data());
  return g;
}

void save_dataset_index(const DatasetIndex& index, const std::string& path) {
  std::string out = "amdnet-index v1\n";
  for (const std::string& d : index.train) out += "train " + d + "\n";
  for (const std::string& d : index.val) out += "val " + d + "\n";
  write_text_file(path, out);
}

DatasetIndex load_dataset_index(const std::string& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "amdnet-index v1")
    throw IoError("bad index magic in " + path);
  DatasetIndex index;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.compare(0, 6, "train ") == 0)
      index.train.push_back(trim(t.substr(6)));
    else if (t.compare(0, 4, "val ") == 0)
      index.val.push_back(trim(t.substr(4)));
    else
      throw IoError("bad index line in " + path + ": '" + t + "'");
  }
  return index;
}

void save_checkpoint(const Model& model, const std::string& path) {
  std::ostringstream head;
  head << "amdnet-checkpoint v1\n";
  std::string cfg;
  model_config_to_kv(model.config(), cfg);
  head << cfg;
  head << "tensors = " << model.params().size() << "\n";
  for (const Parameter& p : model.params()) {
    head << "tensor " << p.name;
    for (int i = 0; i < p.value.ndim(); ++i) head << " " << p.value.dim(i);
    head << "\n";
  }
  head << "data\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << head.str();
  for (const Parameter& p : model.params())
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.numel() * sizeof(double)));
  if (!out) throw IoError("short checkpoint write to " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingCheckpoint(path);
  std::string line;
  if (!std::getline(in, line) || line != "amdnet-checkpoint v1")
    throw IoError("bad checkpoint magic in " + path);

  KeyValues kv;
  std::vector<std::pair<std::string, std::vector<int>>> table;
  int64_t declared = -1;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t == "data") break;
    if (t.compare(0, 7, "tensor ") == 0) {
      std::istringstream ts(t.substr(7));
      std::string name;
      ts >> name;
      std::vector<int> shape;
      int d;
      while (ts >> d) shape.push_back(d);
      table.emplace_back(name, shape);
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw IoError("bad checkpoint header line in " + path + ": '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key == "tensors")
      declared = parse_int(key, value);
    else
      kv.set(key, value);
  }
  if (declared != static_cast<int64_t>(table.size()))
    throw IoError("checkpoint tensor table mismatch in " + path);

  Model model(model_config_from_kv(kv, ModelConfig{}));
  if (table.size() != model.params().size())
    throw IoError("checkpoint holds " + std::to_string(table.size()) +
                  " tensors, model expects " +
                  std::to_string(model.params().size()));
  for (size_t i = 0; i < table.size(); ++i) {
    Parameter& p = model.params()[i];
    if (table[i].first != p.name || table[i].second != p.value.shape())
      throw IoError("checkpoint tensor '" + table[i].first +
                    "' does not match parameter '" + p.name + "'");
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.numel() * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint payload in " + path);
  }
  return model;
}

CsvWriter::CsvWriter(std::vector<std::string> header)
    : columns_(header.size()) {
  for (size_t i = 0; i < header.size(); ++i)
    out_ += (i ? "," : "") + header[i];
  out_ += "\n";
}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw ShapeMismatch("csv row width");
  for (size_t i = 0; i < cells.size(); ++i) out_ += (i ? "," : "") + cells[i];
  out_ += "\n";
}

void CsvWriter::write(const std::string& path) const {
  write_text_file(path, out_);
}

}  // namespace amdnet
