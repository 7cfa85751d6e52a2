#include "conceptor/report.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>

namespace conceptor {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 6> kPalette{{
    {31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {148, 103, 189}, {255, 127, 14}, {23, 190, 207}}};
constexpr int kMargin = 24;

struct Canvas {
  RgbRaster r;
  Canvas(int w, int h) { r = RgbRaster{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w * h * 3), 255)}; }
  void set(int x, int y, const std::array<std::uint8_t, 3>& c) {
    if (x < 0 || y < 0 || x >= r.width || y >= r.height) return;
    const auto i = static_cast<std::size_t>((y * r.width + x) * 3);
    r.data[i] = c[0];
    r.data[i + 1] = c[1];
    r.data[i + 2] = c[2];
  }
  void line(int x0, int y0, int x1, int y1, const std::array<std::uint8_t, 3>& c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
  void rect(int x0, int y0, int x1, int y1, const std::array<std::uint8_t, 3>& c) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
      for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
  }
};

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  }
};

void axes(Canvas& c, double y_zero_frac) {
  const std::array<std::uint8_t, 3> black{0, 0, 0}, grey{190, 190, 190};
  const int w = c.r.width, h = c.r.height;
  if (y_zero_frac > 0.0 && y_zero_frac < 1.0) {
    const int y0 = h - kMargin - static_cast<int>(std::lround(y_zero_frac * (h - 2 * kMargin)));
    c.line(kMargin, y0, w - kMargin, y0, grey);
  }
  c.line(kMargin, h - kMargin, w - kMargin, h - kMargin, black);
  c.line(kMargin, kMargin, kMargin, h - kMargin, black);
}

}  // namespace

RgbRaster line_plot(const std::vector<PlotSeries>& series, int width, int height) {
  require(width > 2 * kMargin && height > 2 * kMargin, "plot too small", "size");
  Range xr, yr;
  for (const auto& s : series) {
    require(s.x.size() == s.y.size(), "plot series '" + s.name + "' has mismatched x/y", "series");
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  xr.finish();
  yr.finish();
  Canvas c(width, height);
  axes(c, (0.0 - yr.lo) / (yr.hi - yr.lo));
  const double pw = width - 2 * kMargin, ph = height - 2 * kMargin;
  auto px = [&](double x) { return kMargin + static_cast<int>(std::lround((x - xr.lo) / (xr.hi - xr.lo) * pw)); };
  auto py = [&](double y) {
    return height - kMargin - static_cast<int>(std::lround((y - yr.lo) / (yr.hi - yr.lo) * ph));
  };
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const auto& col = kPalette[k % kPalette.size()];
    for (std::size_t i = 1; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i - 1]) && std::isfinite(s.y[i]))
        c.line(px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), col);
    if (s.x.size() == 1) c.rect(px(s.x[0]) - 1, py(s.y[0]) - 1, px(s.x[0]) + 1, py(s.y[0]) + 1, col);
  }
  return c.r;
}

RgbRaster bar_plot(const std::vector<double>& values, int width, int height) {
  require(width > 2 * kMargin && height > 2 * kMargin, "plot too small", "size");
  Range yr;
  yr.add(0.0);
  for (double v : values) yr.add(v);
  yr.finish();
  Canvas c(width, height);
  axes(c, (0.0 - yr.lo) / (yr.hi - yr.lo));
  if (values.empty()) return c.r;
  const double pw = width - 2 * kMargin, ph = height - 2 * kMargin;
  const double slot = pw / static_cast<double>(values.size());
  auto py = [&](double y) {
    return height - kMargin - static_cast<int>(std::lround((y - yr.lo) / (yr.hi - yr.lo) * ph));
  };
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int x0 = kMargin + static_cast<int>(std::lround(slot * (i + 0.15)));
    const int x1 = kMargin + static_cast<int>(std::lround(slot * (i + 0.85)));
    c.rect(x0, py(0.0), x1, py(values[i]), kPalette[i % kPalette.size()]);
  }
  return c.r;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

Json curve_to_json(const GeneralizationCurve& g) {
  return {{"names", g.names},
          {"random_token", g.random_token},
          {"T", g.T},
          {"raw", g.raw},
          {"normalized", g.normalized},
          {"stderr", g.stderr_t},
          {"mean_normalized", g.mean_normalized},
          {"stderr_mean", g.stderr_mean}};
}

std::string safe_name(std::string s) {
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  return s;
}

}  // namespace

Json study_report_to_json(const StudyReport& r) {
  Json gen = Json::object();
  for (const auto& [name, curve] : r.generalization) gen[name] = curve_to_json(curve);
  Json inter = Json::array();
  for (const auto& rep : r.intersections) {
    Json per_k = Json::array();
    for (const auto& p : rep.per_k) per_k.push_back({{"k", p.k}, {"mean_count", p.mean_count}, {"percentage", p.percentage}});
    inter.push_back({{"concept", rep.concept_name}, {"per_k", per_k}});
  }
  Json sweeps = Json::array();
  for (const auto& s : r.sweeps)
    sweeps.push_back({{"concept", s.concept_name}, {"token", s.token}, {"scales", s.scales}, {"similarity", s.similarity}});
  Json logs = Json::object();
  for (const auto& [name, log] : r.training_logs) {
    Json steps = Json::array();
    for (const auto& s : log.steps) steps.push_back({s.step, s.reconstruction, s.sparsity, s.total});
    Json vals = Json::array();
    for (const auto& v : log.validations) vals.push_back({v.step, v.score});
    logs[name] = {{"steps", steps}, {"validations", vals}, {"selected_step", log.selected_step}};
  }
  return seal({{"subject_hash", r.subject_hash},
               {"vocab_hash", r.vocab_hash},
               {"seeds", r.seeds},
               {"generalization", gen},
               {"intersections", inter},
               {"intersection_stddev", intersection_stddev(r.intersections)},
               {"sweeps", sweeps},
               {"training_logs", logs},
               {"extra", r.extra}},
              "conceptor.study_report");
}

StudyReport study_report_from_json(const Json& sealed) {
  const Json j = unseal(sealed, "conceptor.study_report");
  StudyReport r;
  r.subject_hash = j.at("subject_hash").get<std::string>();
  r.vocab_hash = j.at("vocab_hash").get<std::string>();
  r.seeds = j.at("seeds");
  r.extra = j.at("extra");
  for (const auto& [name, g] : j.at("generalization").items()) {
    GeneralizationCurve c;
    c.names = g.at("names").get<std::vector<std::string>>();
    c.random_token = g.at("random_token").get<TokenId>();
    c.T = g.at("T").get<int>();
    c.raw = g.at("raw").get<std::vector<std::vector<double>>>();
    c.normalized = g.at("normalized").get<std::vector<std::vector<double>>>();
    c.stderr_t = g.at("stderr").get<std::vector<std::vector<double>>>();
    c.mean_normalized = g.at("mean_normalized").get<std::vector<double>>();
    c.stderr_mean = g.at("stderr_mean").get<std::vector<double>>();
    r.generalization.emplace_back(name, std::move(c));
  }
  for (const auto& rep : j.at("intersections")) {
    IntersectionReport ir;
    ir.concept_name = rep.at("concept").get<std::string>();
    for (const auto& p : rep.at("per_k"))
      ir.per_k.push_back({p.at("k").get<int>(), p.at("mean_count").get<double>(), p.at("percentage").get<double>()});
    r.intersections.push_back(std::move(ir));
  }
  for (const auto& s : j.at("sweeps"))
    r.sweeps.push_back({s.at("concept").get<std::string>(), s.at("token").get<std::string>(),
                        s.at("scales").get<std::vector<double>>(), s.at("similarity").get<std::vector<double>>()});
  for (const auto& [name, l] : j.at("training_logs").items()) {
    TrainingLog log;
    for (const auto& s : l.at("steps"))
      log.steps.push_back({s.at(0).get<int>(), s.at(1).get<double>(), s.at(2).get<double>(), s.at(3).get<double>()});
    for (const auto& v : l.at("validations")) log.validations.push_back({v.at(0).get<int>(), v.at(1).get<double>()});
    log.selected_step = l.at("selected_step").get<int>();
    r.training_logs.emplace_back(name, std::move(log));
  }
  return r;
}

void merge_reports(StudyReport& a, const StudyReport& b) {
  if (a.subject_hash.empty()) a.subject_hash = b.subject_hash;
  if (a.vocab_hash.empty()) a.vocab_hash = b.vocab_hash;
  require(a.subject_hash == b.subject_hash && a.vocab_hash == b.vocab_hash,
          "cannot merge reports over different subjects", "report");
  a.seeds.update(b.seeds);
  a.extra.update(b.extra);
  a.generalization.insert(a.generalization.end(), b.generalization.begin(), b.generalization.end());
  a.intersections.insert(a.intersections.end(), b.intersections.begin(), b.intersections.end());
  a.sweeps.insert(a.sweeps.end(), b.sweeps.begin(), b.sweeps.end());
  a.training_logs.insert(a.training_logs.end(), b.training_logs.begin(), b.training_logs.end());
}

std::vector<std::string> emit_report(const StudyReport& r, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir / "tables", ec);
  fs::create_directories(out_dir / "plots", ec);
  if (ec || !fs::is_directory(out_dir / "plots"))
    throw ValidationError("cannot create report directory " + out_dir.string(), "out");

  std::vector<std::string> written;
  auto put_text = [&](const std::string& rel, const std::string& text) {
    write_file_atomic(out_dir / rel, text);
    written.push_back(rel);
  };
  auto put_png = [&](const std::string& rel, const RgbRaster& raster) {
    write_file_atomic(out_dir / rel, encode_png(raster));
    written.push_back(rel);
  };

  put_text("report.json", canonical_dump(study_report_to_json(r)) + "\n");

  for (const auto& [name, g] : r.generalization) {
    std::string csv = "t";
    for (const auto& n : g.names) csv += "," + n;
    csv += "\n";
    for (int t = 1; t <= g.T; ++t) {
      csv += std::to_string(t);
      for (const auto& curve : g.normalized) csv += "," + format_double(curve[static_cast<std::size_t>(t - 1)]);
      csv += "\n";
    }
    put_text("tables/generalization_" + safe_name(name) + ".csv", csv);
    std::vector<PlotSeries> series;
    for (std::size_t c = 0; c < g.names.size(); ++c) {
      PlotSeries s{g.names[c], {}, g.normalized[c]};
      for (int t = 1; t <= g.T; ++t) s.x.push_back(t);
      series.push_back(std::move(s));
    }
    put_png("plots/generalization_" + safe_name(name) + ".png", line_plot(series));
  }

  if (!r.intersections.empty()) {
    std::string csv = "concept,k,mean_count,percentage\n";
    std::vector<double> bars;
    for (const auto& rep : r.intersections)
      for (const auto& p : rep.per_k) {
        csv += rep.concept_name + "," + std::to_string(p.k) + "," + format_double(p.mean_count) + "," +
               format_double(p.percentage) + "\n";
        bars.push_back(p.percentage);
      }
    put_text("tables/intersection.csv", csv);
    put_png("plots/intersection.png", bar_plot(bars));
  }

  if (!r.sweeps.empty()) {
    std::string csv = "concept,token,scale,similarity\n";
    for (const auto& s : r.sweeps) {
      for (std::size_t i = 0; i < s.scales.size(); ++i)
        csv += s.concept_name + "," + s.token + "," + format_double(s.scales[i]) + "," +
               format_double(s.similarity.at(i)) + "\n";
      put_png("plots/sweep_" + safe_name(s.concept_name) + "_" + safe_name(s.token) + ".png",
              line_plot({{s.token, s.scales, s.similarity}}));
    }
    put_text("tables/sweeps.csv", csv);
  }

  for (const auto& [name, log] : r.training_logs) {
    std::string csv = "step,reconstruction,sparsity,total\n";
    PlotSeries rec{"reconstruction", {}, {}};
    for (const auto& s : log.steps) {
      csv += std::to_string(s.step) + "," + format_double(s.reconstruction) + "," + format_double(s.sparsity) + "," +
             format_double(s.total) + "\n";
      rec.x.push_back(s.step);
      rec.y.push_back(s.reconstruction);
    }
    put_text("tables/training_" + safe_name(name) + ".csv", csv);
    put_png("plots/loss_" + safe_name(name) + ".png", line_plot({rec}));
  }
  return written;
}

}  // namespace conceptor
