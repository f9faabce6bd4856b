#include "sidefield/geom/obj_io.hpp"

#include <charconv>
#include <sstream>

#include "sidefield/core/error.hpp"
#include "sidefield/core/io.hpp"

namespace sidefield::geom {

std::string to_obj_string(const TriMesh& mesh) {
  validate(mesh);
  std::string out;
  out.reserve(mesh.vertices.size() * 64 + mesh.faces.size() * 24);
  const bool colored = mesh.has_colors();
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    out += "v ";
    out += io::format_double(v.x()) + ' ' + io::format_double(v.y()) + ' ' + io::format_double(v.z());
    if (colored) {
      const auto& c = mesh.colors[i];
      out += ' ' + io::format_double(c.x()) + ' ' + io::format_double(c.y()) + ' ' + io::format_double(c.z());
    }
    out += '\n';
  }
  for (const auto& f : mesh.faces)
    out += "f " + std::to_string(f[0] + 1) + ' ' + std::to_string(f[1] + 1) + ' ' + std::to_string(f[2] + 1) + '\n';
  return out;
}

namespace {

double parse_double(std::string_view tok, int line) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ContractViolation("OBJ line " + std::to_string(line) + ": bad number '" + std::string(tok) + "'");
  return v;
}

int parse_index(std::string_view tok, int vertex_count, int line) {
  tok = tok.substr(0, tok.find('/'));
  int v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc()) throw ContractViolation("OBJ line " + std::to_string(line) + ": bad face index");
  return v < 0 ? vertex_count + v : v - 1;
}

}  // namespace

TriMesh from_obj_string(const std::string& text) {
  TriMesh mesh;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  int colored_lines = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      std::vector<std::string> toks;
      std::string t;
      while (ls >> t) toks.push_back(t);
      if (toks.size() != 3 && toks.size() != 6)
        throw ContractViolation("OBJ line " + std::to_string(line_no) + ": expected 3 or 6 vertex values");
      mesh.vertices.emplace_back(parse_double(toks[0], line_no), parse_double(toks[1], line_no),
                                 parse_double(toks[2], line_no));
      if (toks.size() == 6) {
        ++colored_lines;
        mesh.colors.emplace_back(parse_double(toks[3], line_no), parse_double(toks[4], line_no),
                                 parse_double(toks[5], line_no));
      }
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string t;
      const int n = static_cast<int>(mesh.vertices.size());
      while (ls >> t) idx.push_back(parse_index(t, n, line_no));
      if (idx.size() < 3) throw ContractViolation("OBJ line " + std::to_string(line_no) + ": face needs 3 indices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  if (colored_lines != 0 && colored_lines != static_cast<int>(mesh.vertices.size()))
    throw ContractViolation("OBJ mixes colored and uncolored vertices");
  validate(mesh);
  return mesh;
}

void write_obj(const std::filesystem::path& path, const TriMesh& mesh) {
  io::write_file_atomic(path, to_obj_string(mesh));
}

TriMesh read_obj(const std::filesystem::path& path) { return from_obj_string(io::read_file(path)); }

}  // namespace sidefield::geom
