#include "pointseq/io.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pointseq/nn.hpp"
#include "pointseq/rng.hpp"

namespace fs = std::filesystem;

namespace pointseq {

PointCloud load_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  PointCloud cloud;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream is(line);
    double x, y, z;
    if (!(is >> x)) continue;  // blank or comment-only line
    if (!(is >> y >> z))
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected three coordinates");
    std::string trailing;
    if (is >> trailing)
      throw ParseError(path + ":" + std::to_string(lineno) + ": trailing tokens");
    cloud.points.push_back({x, y, z});
    cloud.source_indices.push_back(static_cast<std::int64_t>(cloud.points.size()) - 1);
  }
  if (cloud.points.empty()) throw ParseError(path + ": no points");
  return cloud;
}

void save_xyz(const std::string& path, const PointCloud& cloud) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  for (const Point3& p : cloud.points) std::fprintf(f, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
  std::fclose(f);
}

TriangleMesh parse_off(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  int lineno = 0;
  std::string line;

  auto next_content = [&]() -> std::string {
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      if (line.find_first_not_of(" \t\r\n") != std::string::npos) return line;
    }
    throw ParseError(path + ":" + std::to_string(lineno) + ": unexpected end of file");
  };

  std::string header = next_content();
  std::istringstream hs(header);
  std::string magic;
  hs >> magic;
  if (magic != "OFF") throw ParseError(path + ":" + std::to_string(lineno) + ": missing OFF header");

  long nv = -1, nf = -1, ne = -1;
  if (!(hs >> nv >> nf >> ne)) {
    std::istringstream cs(next_content());
    if (!(cs >> nv >> nf >> ne))
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad vertex/face counts");
  }
  if (nv < 1 || nf < 0) throw ParseError(path + ":" + std::to_string(lineno) + ": bad counts");

  TriangleMesh mesh;
  mesh.vertices.resize(nv);
  for (long i = 0; i < nv; ++i) {
    std::istringstream vs(next_content());
    if (!(vs >> mesh.vertices[i].x >> mesh.vertices[i].y >> mesh.vertices[i].z))
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad vertex");
  }
  for (long i = 0; i < nf; ++i) {
    std::istringstream fsr(next_content());
    int k = 0;
    if (!(fsr >> k) || k < 3) throw ParseError(path + ":" + std::to_string(lineno) + ": bad face");
    std::vector<int> idx(k);
    for (int j = 0; j < k; ++j) {
      if (!(fsr >> idx[j]) || idx[j] < 0 || idx[j] >= nv)
        throw ParseError(path + ":" + std::to_string(lineno) + ": face index out of range");
    }
    for (int j = 1; j + 1 < k; ++j) mesh.triangles.push_back({idx[0], idx[j], idx[j + 1]});
  }
  if (mesh.triangles.empty()) throw ParseError(path + ": mesh has no faces");
  return mesh;
}

PointCloud sample_mesh(const TriangleMesh& mesh, int n_points, std::uint64_t seed) {
  if (n_points < 1) throw std::invalid_argument("n_points must be >= 1");
  std::vector<double> cum_area(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Point3 a = mesh.vertices[tri[0]], b = mesh.vertices[tri[1]], c = mesh.vertices[tri[2]];
    const Point3 ab = b - a, ac = c - a;
    const double cx = ab.y * ac.z - ab.z * ac.y;
    const double cy = ab.z * ac.x - ab.x * ac.z;
    const double cz = ab.x * ac.y - ab.y * ac.x;
    total += 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
    cum_area[t] = total;
  }
  if (!(total > 0.0)) throw std::runtime_error("mesh has zero surface area");

  Rng rng(seed);
  PointCloud cloud;
  cloud.points.resize(n_points);
  cloud.source_indices.resize(n_points);
  for (int i = 0; i < n_points; ++i) {
    const double pick = rng.uniform() * total;
    const std::size_t t =
        std::lower_bound(cum_area.begin(), cum_area.end(), pick) - cum_area.begin();
    const auto& tri = mesh.triangles[std::min(t, mesh.triangles.size() - 1)];
    const Point3 a = mesh.vertices[tri[0]], b = mesh.vertices[tri[1]], c = mesh.vertices[tri[2]];
    double u = rng.uniform(), v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    cloud.points[i] = {a.x + u * (b.x - a.x) + v * (c.x - a.x),
                       a.y + u * (b.y - a.y) + v * (c.y - a.y),
                       a.z + u * (b.z - a.z) + v * (c.z - a.z)};
    cloud.source_indices[i] = i;
  }
  return cloud;
}

PointCloud load_off(const std::string& path, int n_points, std::uint64_t seed) {
  return sample_mesh(parse_off(path), n_points, seed);
}

PointCloud load_cloud(const std::string& path, int n_points, std::uint64_t seed) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "xyz" || ext == "txt") return load_xyz(path);
  if (ext == "off" || ext == "OFF") return load_off(path, n_points, seed);
  throw ParseError("unsupported point-cloud format: " + path);
}

LabeledDataset load_dataset_dir(const std::string& root, const std::string& split, int n_points,
                                std::uint64_t seed) {
  if (!fs::is_directory(root)) throw ParseError("not a directory: " + root);
  LabeledDataset ds;
  ds.split = split;
  std::vector<std::string> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw ParseError("no class directories under " + root);

  std::uint64_t item_id = 0;
  for (std::size_t label = 0; label < class_dirs.size(); ++label) {
    ds.class_names.push_back(class_dirs[label]);
    const fs::path dir = fs::path(root) / class_dirs[label] / split;
    if (!fs::is_directory(dir)) continue;
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string ext = e.path().extension().string();
      if (ext == ".off" || ext == ".xyz") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    for (const std::string& f : files) {
      LabeledItem item;
      item.cloud = load_cloud(f, n_points, mix_seed(seed, item_id));
      item.label = static_cast<int>(label);
      item.item_id = item_id++;
      ds.items.push_back(std::move(item));
    }
  }
  if (ds.items.empty()) throw ParseError("no items found under " + root + " split " + split);
  return ds;
}

// ---- model checkpoints ----

namespace {
constexpr char kMagic[8] = {'P', 'S', 'E', 'Q', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const Model& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kMagic, 8);
  write_u32(out, kVersion);
  const std::string cfg = config_to_string(m.cfg);
  write_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  write_u32(out, static_cast<std::uint32_t>(m.params.tensors().size()));
  for (const ParamTensor& t : m.params.tensors()) {
    write_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int s : t.shape) write_u32(out, static_cast<std::uint32_t>(s));
    out.write(reinterpret_cast<const char*>(t.v.data()),
              static_cast<std::streamsize>(t.v.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw ParseError(path + ": not a checkpoint file");
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) throw ParseError(path + ": unsupported checkpoint version");
  const std::uint32_t cfg_len = read_u32(in);
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), cfg_len);

  Model m = Model::init(config_from_string(cfg_text), 0);
  const std::uint32_t count = read_u32(in);
  if (count != m.params.tensors().size()) throw ParseError(path + ": tensor count mismatch");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t ndim = read_u32(in);
    std::vector<int> shape(ndim);
    for (std::uint32_t j = 0; j < ndim; ++j) shape[j] = static_cast<int>(read_u32(in));
    ParamTensor& t = m.params.at(name);
    if (t.shape != shape) throw ParseError(path + ": shape mismatch for " + name);
    in.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(double)));
  }
  if (!in) throw ParseError(path + ": truncated checkpoint");
  return m;
}

}  // namespace pointseq
