#include "gridless/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace gridless {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

double parse_number(const std::string& s, long line) {
  if (s == "nan" || s == "NaN" || s == "NAN") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != last) throw IoError("cannot parse number '" + s + "'", line);
  if (std::isinf(v)) throw IoError("infinite value '" + s + "'", line);
  return v;
}

void write_complex(std::ostream& os, cplx v) { os << ',' << v.real() << ',' << v.imag(); }

bool next_content_line(std::istream& is, std::string& line, long& lineno) {
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

}  // namespace

void write_ensemble_csv(std::ostream& os, const SignalEnsemble& z, const ObservationMask& mask) {
  if (z.rows() != mask.rows() || z.cols() != mask.cols()) throw DomainError("write_ensemble_csv: shape mismatch");
  os << 'i';
  for (Eigen::Index l = 1; l <= z.cols(); ++l) os << ",x" << l << "_re,x" << l << "_im";
  os << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    os << i;
    for (Eigen::Index l = 0; l < z.cols(); ++l) {
      if (mask.observed(i, l)) {
        write_complex(os, z(i, l));
      } else {
        os << ",nan,nan";
      }
    }
    os << '\n';
  }
}

EnsembleData read_ensemble_csv(std::istream& is) {
  std::string line;
  long lineno = 0;
  if (!next_content_line(is, line, lineno)) throw IoError("empty ensemble file", 1);
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "i" || (header.size() - 1) % 2 != 0)
    throw IoError("header must be i,x1_re,x1_im,...", lineno);
  const auto L = static_cast<Eigen::Index>((header.size() - 1) / 2);
  for (Eigen::Index l = 0; l < L; ++l) {
    const std::string base = "x" + std::to_string(l + 1);
    if (header[static_cast<std::size_t>(1 + 2 * l)] != base + "_re" || header[static_cast<std::size_t>(2 + 2 * l)] != base + "_im")
      throw IoError("unexpected header column '" + header[static_cast<std::size_t>(1 + 2 * l)] + "'", lineno);
  }
  std::vector<std::vector<cplx>> rows;
  std::vector<std::vector<bool>> seen;
  while (next_content_line(is, line, lineno)) {
    const auto f = split_csv(line);
    if (f.size() != header.size())
      throw IoError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()), lineno);
    const double idx = parse_number(f[0], lineno);
    if (idx != static_cast<double>(rows.size())) throw IoError("row index out of sequence", lineno);
    std::vector<cplx> vals(static_cast<std::size_t>(L));
    std::vector<bool> obs(static_cast<std::size_t>(L));
    for (Eigen::Index l = 0; l < L; ++l) {
      const double re = parse_number(f[static_cast<std::size_t>(1 + 2 * l)], lineno);
      const double im = parse_number(f[static_cast<std::size_t>(2 + 2 * l)], lineno);
      const bool ok = !std::isnan(re) && !std::isnan(im);
      obs[static_cast<std::size_t>(l)] = ok;
      vals[static_cast<std::size_t>(l)] = ok ? cplx(re, im) : cplx(0.0, 0.0);
    }
    rows.push_back(std::move(vals));
    seen.push_back(std::move(obs));
  }
  if (rows.empty()) throw IoError("ensemble file has no data rows", lineno + 1);
  const auto n = static_cast<Eigen::Index>(rows.size());
  CMatrix z = CMatrix::Zero(n, L);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> pat(n, L);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index l = 0; l < L; ++l) {
      z(i, l) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)];
      pat(i, l) = seen[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)];
    }
  }
  if (pat.all()) return EnsembleData{std::move(z), ObservationMask::full(n, L)};
  bool common = true;
  std::vector<Eigen::Index> rowset;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool any = pat.row(i).any();
    if (any && !pat.row(i).all()) common = false;
    if (any) rowset.push_back(i);
  }
  if (common) return EnsembleData{std::move(z), ObservationMask::common_rows(n, L, rowset)};
  std::vector<std::pair<Eigen::Index, Eigen::Index>> entries;
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index i = 0; i < n; ++i)
      if (pat(i, l)) entries.emplace_back(i, l);
  return EnsembleData{std::move(z), ObservationMask::entrywise(n, L, entries)};
}

void write_covariance_csv(std::ostream& os, const CovarianceSample& s) {
  nlohmann::json h;
  h["n"] = s.n;
  h["m"] = s.m();
  h["omega"] = s.omega;
  h["L"] = s.L;
  os << "# " << h.dump() << '\n';
  os << "row";
  for (Eigen::Index j = 1; j <= s.m(); ++j) os << ",c" << j << "_re,c" << j << "_im";
  os << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < s.sigma.rows(); ++i) {
    os << i;
    for (Eigen::Index j = 0; j < s.sigma.cols(); ++j) write_complex(os, s.sigma(i, j));
    os << '\n';
  }
}

CovarianceSample read_covariance_csv(std::istream& is) {
  std::string line;
  long lineno = 0;
  if (!next_content_line(is, line, lineno)) throw IoError("empty covariance file", 1);
  if (line.rfind('#', 0) != 0) throw IoError("covariance file must start with a '# {json}' header", lineno);
  CovarianceSample s;
  try {
    const auto h = nlohmann::json::parse(line.substr(1));
    s.n = h.at("n").get<Eigen::Index>();
    s.L = h.at("L").get<Eigen::Index>();
    s.omega = h.at("omega").get<std::vector<Eigen::Index>>();
    if (h.contains("m") && h.at("m").get<std::size_t>() != s.omega.size())
      throw IoError("header m does not match omega", lineno);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad covariance header: ") + e.what(), lineno);
  }
  const Eigen::Index m = s.m();
  if (!next_content_line(is, line, lineno)) throw IoError("missing column header", lineno + 1);
  const auto header = split_csv(line);
  if (header.empty() || header[0] != "row" || static_cast<Eigen::Index>(header.size()) != 1 + 2 * m)
    throw IoError("column header must be row,c1_re,c1_im,... with m pairs", lineno);
  s.sigma = CMatrix::Zero(m, m);
  Eigen::Index i = 0;
  while (next_content_line(is, line, lineno)) {
    if (i >= m) throw IoError("more than m data rows", lineno);
    const auto f = split_csv(line);
    if (f.size() != header.size())
      throw IoError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()), lineno);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double re = parse_number(f[static_cast<std::size_t>(1 + 2 * j)], lineno);
      const double im = parse_number(f[static_cast<std::size_t>(2 + 2 * j)], lineno);
      if (std::isnan(re) || std::isnan(im)) throw IoError("covariance entries must be finite", lineno);
      s.sigma(i, j) = cplx(re, im);
    }
    ++i;
  }
  if (i != m) throw IoError("expected " + std::to_string(m) + " data rows, found " + std::to_string(i), lineno + 1);
  return s;
}

EnsembleData read_ensemble_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_ensemble_csv(in);
}

CovarianceSample read_covariance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_covariance_csv(in);
}

}  // namespace gridless
