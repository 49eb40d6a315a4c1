#pragma once

// CSV and SVG emission plus wide-format curve ingestion.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pfp/error.hpp"
#include "pfp/funkdata.hpp"

namespace pfp {

/// Fixed-point with six decimals; negative zero prints as zero.
inline std::string fmt6(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline double require_double(const std::string& s, const std::string& where) {
  const auto v = parse_double(s);
  if (!v) throw InvalidArgument("not a number in " + where + ": '" + s + "'");
  return *v;
}

}  // namespace detail

/// Reads J reals (comma, whitespace or newline separated).
inline Vector read_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grid file " + path);
  std::vector<double> pts;
  std::string tok;
  while (in >> tok) {
    for (const auto& cell : detail::split(tok, ','))
      if (!cell.empty()) pts.push_back(detail::require_double(cell, path));
  }
  if (pts.size() < 2) throw InvalidArgument("grid file needs at least two points");
  return Eigen::Map<const Vector>(pts.data(), static_cast<Index>(pts.size()));
}

/// Wide CSV: a header row, then one curve per row. A numeric header is the
/// grid; a `t_1,...,t_J` header means the equally spaced closed grid unless
/// `grid_path` names a grid file.
inline DiscreteSample read_wide_csv(const std::string& path, const std::string& grid_path = "") {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(path + " is empty");
  const auto header = detail::split(line, ',');
  const auto J = static_cast<Index>(header.size());
  if (J < 2) throw InvalidArgument(path + ": need at least two columns");

  std::optional<Vector> pts;
  bool numeric = true;
  Vector hp(J);
  for (Index j = 0; j < J; ++j) {
    const auto v = detail::parse_double(header[static_cast<std::size_t>(j)]);
    if (!v) {
      numeric = false;
      break;
    }
    hp[j] = *v;
  }
  if (!grid_path.empty()) pts = read_grid_file(grid_path);
  else if (numeric) pts = hp;
  if (pts && pts->size() != J) throw ShapeError("grid length differs from the CSV column count");

  std::vector<std::vector<double>> rows;
  Index lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    if (static_cast<Index>(cells.size()) != J)
      throw ShapeError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(J) + " values");
    std::vector<double> r;
    r.reserve(cells.size());
    for (const auto& c : cells) r.push_back(detail::require_double(c, path + ":" + std::to_string(lineno)));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw InvalidArgument(path + " has no curves");
  Matrix vals(static_cast<Index>(rows.size()), J);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Index j = 0; j < J; ++j) vals(static_cast<Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  Grid g = pts ? Grid::trapezoid(*pts) : make_grid(J);
  return DiscreteSample(std::move(g), std::move(vals));
}

/// Header `t_1,...,t_J` and six-decimal rows.
inline void write_wide_csv(const std::string& path, const DiscreteSample& s) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (Index j = 0; j < s.grid.size(); ++j) out << (j ? "," : "") << "t_" << (j + 1);
  out << '\n';
  for (Index k = 0; k < s.values.rows(); ++k) {
    for (Index j = 0; j < s.values.cols(); ++j) out << (j ? "," : "") << fmt6(s.values(k, j));
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

/// A table with a fixed column order; text cells are written verbatim.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) {
    if (row.size() != columns.size()) throw ShapeError("table row width differs from the header");
    rows.push_back(std::move(row));
  }
  std::string csv() const {
    std::ostringstream o;
    for (std::size_t c = 0; c < columns.size(); ++c) o << (c ? "," : "") << columns[c];
    o << '\n';
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) o << (c ? "," : "") << r[c];
      o << '\n';
    }
    return o.str();
  }
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

/// Creates `dir` if needed; failure is an IoError.
inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (dir.empty()) return;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

struct SvgSeries {
  std::string label;
  Vector x;
  Vector y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

/// Minimal line plot.
inline std::string svg_plot(const std::string& title, const std::vector<SvgSeries>& series, int width = 640,
                            int height = 400) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (Index i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  const double m = 50.0, pw = width - 2 * m, ph = height - 2 * m;
  auto px = [&](double x) { return m + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return height - m - (y - y0) / (y1 - y0) * ph; };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << m << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n"
    << "<rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#888\"/>\n"
    << "<text x=\"" << m << "\" y=\"" << height - m + 16 << "\" font-size=\"10\">" << fmt6(x0) << "</text>\n"
    << "<text x=\"" << width - m - 40 << "\" y=\"" << height - m + 16 << "\" font-size=\"10\">" << fmt6(x1)
    << "</text>\n"
    << "<text x=\"4\" y=\"" << height - m << "\" font-size=\"10\">" << fmt6(y0) << "</text>\n"
    << "<text x=\"4\" y=\"" << m + 10 << "\" font-size=\"10\">" << fmt6(y1) << "</text>\n";
  int legend = 0;
  for (const auto& s : series) {
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
      << (s.dashed ? " stroke-dasharray=\"4 3\"" : "") << " points=\"";
    for (Index i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i])) o << fmt6(px(s.x[i])) << ',' << fmt6(py(s.y[i])) << ' ';
    o << "\"/>\n";
    if (!s.label.empty()) {
      const double ly = m + 14.0 * (legend++ + 1);
      o << "<text x=\"" << width - m - 120 << "\" y=\"" << ly << "\" font-size=\"11\" fill=\"" << s.color << "\">"
        << s.label << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace pfp
