#include "psc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "psc/errors.hpp"
#include "psc/format.hpp"
#include "psc/tensor_io.hpp"

namespace psc {

std::size_t Dataset::pedestrian_count() const {
  std::size_t n = 0;
  for (const auto& s : scenes) n += s.annotations.size();
  return n;
}

Subset parse_subset(std::string_view name) {
  if (name == "R") return Subset::Reasonable;
  if (name == "HO") return Subset::HeavyOcclusion;
  if (name == "R+HO") return Subset::ReasonableAndHeavy;
  throw ConfigError("unknown subset '" + std::string(name) + "' (expected R, HO or R+HO)");
}

std::string_view subset_name(Subset s) {
  switch (s) {
    case Subset::Reasonable: return "R";
    case Subset::HeavyOcclusion: return "HO";
    case Subset::ReasonableAndHeavy: return "R+HO";
  }
  return "?";
}

bool in_subset(const Annotation& a, Subset s) {
  if (!(a.height > kSubsetMinHeight)) return false;
  const bool reasonable = a.visibility > kReasonableMinVisibility;
  const bool heavy = a.visibility >= kHeavyMinVisibility && a.visibility <= kReasonableMinVisibility;
  switch (s) {
    case Subset::Reasonable: return reasonable;
    case Subset::HeavyOcclusion: return heavy;
    case Subset::ReasonableAndHeavy: return reasonable || heavy;
  }
  return false;
}

std::vector<AnnotationRef> subset(const Dataset& dataset, Subset s) {
  std::vector<AnnotationRef> out;
  for (std::size_t i = 0; i < dataset.scenes.size(); ++i) {
    const auto& anns = dataset.scenes[i].annotations;
    for (std::size_t j = 0; j < anns.size(); ++j) {
      if (in_subset(anns[j], s)) out.push_back({i, j});
    }
  }
  return out;
}

std::vector<AnnotationRef> subset(const Dataset& dataset, std::string_view name) {
  return subset(dataset, parse_subset(name));
}

std::string format_annotation_line(std::size_t image_id, const Annotation& a) {
  std::string line = std::to_string(image_id);
  for (double v : {a.full.x, a.full.y, a.full.w, a.full.h, a.visible.x, a.visible.y, a.visible.w, a.visible.h,
                   a.visibility}) {
    line += ' ';
    line += format_number(v);
  }
  return line;
}

namespace {

std::string image_file_name(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu.tsr", id);
  return buf;
}

}  // namespace

void save_split(const std::filesystem::path& dir, const Dataset& dataset) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw DataError("cannot create " + (dir / "images").string() + ": " + ec.message());
  std::ofstream ann(dir / "annotations.txt", std::ios::trunc);
  std::ofstream ids(dir / "images.txt", std::ios::trunc);
  std::ofstream decoys(dir / "decoys.txt", std::ios::trunc);
  if (!ann || !ids || !decoys) throw DataError("cannot write annotation files under " + dir.string());
  for (const auto& scene : dataset.scenes) {
    save_tensors(dir / "images" / image_file_name(scene.id), {{"image", scene.image}});
    ids << scene.id << '\n';
    for (const auto& a : scene.annotations) ann << format_annotation_line(scene.id, a) << '\n';
    for (const auto& b : scene.decoys) {
      decoys << scene.id << ' ' << format_number(b.x) << ' ' << format_number(b.y) << ' ' << format_number(b.w) << ' '
             << format_number(b.h) << '\n';
    }
  }
  if (!ann || !ids || !decoys) throw DataError("failed writing annotation files under " + dir.string());
}

Dataset load_split(const std::filesystem::path& dir) {
  std::ifstream ids(dir / "images.txt");
  if (!ids) throw DataError("missing image list " + (dir / "images.txt").string());
  Dataset ds;
  std::map<std::size_t, std::size_t> index;
  std::size_t id = 0;
  while (ids >> id) {
    Scene s;
    s.id = id;
    s.image = find_tensor(load_tensors(dir / "images" / image_file_name(id)), "image");
    index[id] = ds.scenes.size();
    ds.scenes.push_back(std::move(s));
  }
  std::ifstream ann(dir / "annotations.txt");
  if (!ann) throw DataError("missing annotations " + (dir / "annotations.txt").string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ann, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    Annotation a;
    std::size_t image_id = 0;
    if (!(is >> image_id >> a.full.x >> a.full.y >> a.full.w >> a.full.h >> a.visible.x >> a.visible.y >>
          a.visible.w >> a.visible.h >> a.visibility)) {
      throw DataError("malformed annotation at " + (dir / "annotations.txt").string() + ":" + std::to_string(line_no));
    }
    auto it = index.find(image_id);
    if (it == index.end()) throw DataError("annotation references unknown image " + std::to_string(image_id));
    a.height = a.full.h;
    ds.scenes[it->second].annotations.push_back(a);
  }
  std::ifstream decoys(dir / "decoys.txt");
  line_no = 0;
  while (decoys && std::getline(decoys, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    Box b;
    std::size_t image_id = 0;
    if (!(is >> image_id >> b.x >> b.y >> b.w >> b.h)) {
      throw DataError("malformed decoy at " + (dir / "decoys.txt").string() + ":" + std::to_string(line_no));
    }
    auto it = index.find(image_id);
    if (it == index.end()) throw DataError("decoy references unknown image " + std::to_string(image_id));
    ds.scenes[it->second].decoys.push_back(b);
  }
  return ds;
}

}  // namespace psc
