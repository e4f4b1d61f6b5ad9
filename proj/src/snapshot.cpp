#include "ck/snapshot.hpp"

#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "ck/error.hpp"

namespace ck {

namespace {

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    int v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size()) throw Error(Errc::SpecParse, "bad integer list '" + s + "'");
    out.push_back(v);
  }
  return out;
}

void write_header(std::ostream& os, const Patch& P, const char* kind, int degree, Group g, std::size_t comps) {
  const BaseGrid& grid = P.grid();
  os << "# ckfield v1\n# manifold=" << manifold_name(grid.manifold) << " dims=" << join(grid.dims)
     << " box_lo=" << join(P.box().lo) << " box_len=" << join(P.box().len) << " kind=" << kind
     << " degree=" << degree << " group=" << group_name(g) << " components=" << comps << "\n";
}

void write_matrix(std::ostream& os, const Mat2& m, bool first) {
  char buf[32];
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      for (double x : {m(r, c).real(), m(r, c).imag()}) {
        if (!first) os << ',';
        first = false;
        auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
        os.write(buf, res.ptr - buf);
      }
}

struct Header {
  std::map<std::string, std::string> kv;
  const std::string& at(const std::string& k) const {
    auto it = kv.find(k);
    if (it == kv.end()) throw Error(Errc::SpecParse, "snapshot header lacks '" + k + "'");
    return it->second;
  }
};

Header read_header(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "# ckfield v1") throw Error(Errc::SpecParse, "not a ckfield v1 snapshot");
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw Error(Errc::SpecParse, "missing snapshot header");
  Header h;
  std::stringstream ss(line.substr(2));
  std::string tok;
  while (ss >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) throw Error(Errc::SpecParse, "bad header token '" + tok + "'");
    h.kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return h;
}

PatchPtr header_patch(const Header& h, const std::shared_ptr<const BaseGrid>& grid) {
  if (h.at("manifold") != manifold_name(grid->manifold) || split_ints(h.at("dims")) != grid->dims)
    throw Error(Errc::SpecParse, "snapshot grid does not match the base grid");
  Box b{split_ints(h.at("box_lo")), split_ints(h.at("box_len"))};
  if (static_cast<int>(b.lo.size()) != grid->n || b.len.size() != b.lo.size())
    throw Error(Errc::SpecParse, "snapshot box has the wrong dimension");
  return std::make_shared<const Patch>(grid, b);
}

std::vector<Mat2> read_rows(std::istream& is, std::size_t points, std::size_t comps) {
  std::vector<Mat2> out(points * comps);
  std::string line;
  for (std::size_t p = 0; p < points; ++p) {
    if (!std::getline(is, line)) throw Error(Errc::SpecParse, "snapshot ends early");
    const char* s = line.data();
    const char* e = s + line.size();
    for (std::size_t c = 0; c < comps; ++c)
      for (int k = 0; k < 8; ++k) {
        double x = 0.0;
        auto [q, ec] = std::from_chars(s, e, x);
        if (ec != std::errc()) throw Error(Errc::SpecParse, "bad number in snapshot row " + std::to_string(p));
        s = q;
        if (s < e && *s == ',') ++s;
        cplx& z = out[c * points + p](k / 4, (k / 2) % 2);
        z = k % 2 ? cplx(z.real(), x) : cplx(x, z.imag());
      }
    if (s != e) throw Error(Errc::SpecParse, "extra values in snapshot row " + std::to_string(p));
  }
  return out;
}

}  // namespace

void write_snapshot(std::ostream& os, const GroupField& g) {
  write_header(os, *g.patch, "group", 0, g.group, 1);
  for (const Mat2& m : g.v) {
    write_matrix(os, m, true);
    os << '\n';
  }
}

void write_snapshot(std::ostream& os, const FormField& w) {
  write_header(os, *w.patch, "form", w.degree, w.group, w.comp.size());
  for (std::size_t p = 0; p < w.size(); ++p) {
    for (std::size_t c = 0; c < w.comp.size(); ++c) write_matrix(os, w.comp[c][p], c == 0);
    os << '\n';
  }
}

GroupField read_group_snapshot(std::istream& is, const std::shared_ptr<const BaseGrid>& grid) {
  Header h = read_header(is);
  if (h.at("kind") != "group") throw Error(Errc::SpecParse, "snapshot is not a group field");
  GroupField g = GroupField::identity(header_patch(h, grid), parse_group(h.at("group")));
  g.v = read_rows(is, g.patch->size(), 1);
  for (const Mat2& m : g.v)
    if (!is_group_element(g.group, m, 1e-10)) throw Error(Errc::SpecParse, "snapshot value is not in the group");
  return g;
}

FormField read_form_snapshot(std::istream& is, const std::shared_ptr<const BaseGrid>& grid) {
  Header h = read_header(is);
  if (h.at("kind") != "form") throw Error(Errc::SpecParse, "snapshot is not a form field");
  int degree = split_ints(h.at("degree")).at(0);
  FormField w = FormField::zeros(header_patch(h, grid), degree, parse_group(h.at("group")));
  std::size_t comps = w.comp.size();
  if (split_ints(h.at("components")).at(0) != static_cast<int>(comps))
    throw Error(Errc::SpecParse, "component count does not match the degree");
  auto rows = read_rows(is, w.size(), comps);
  for (std::size_t c = 0; c < comps; ++c)
    std::copy(rows.begin() + c * w.size(), rows.begin() + (c + 1) * w.size(), w.comp[c].begin());
  return w;
}

}  // namespace ck
