#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "afplus/bench/experiment.hpp"

namespace afp {

enum class ReportFormat { Csv, Markdown };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "markdown" || s == "md") return ReportFormat::Markdown;
  throw ContractViolation("unknown report format '" + s + "' (expected csv or markdown)");
}

enum class Metric { Psnr, Ssim, Vif, MsSsim };

/// Column order of the results table.
inline constexpr std::array<Metric, 4> kReportMetrics{Metric::Psnr, Metric::Ssim, Metric::Vif, Metric::MsSsim};

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::Psnr: return "PSNR";
    case Metric::Ssim: return "SSIM";
    case Metric::Vif: return "VIF";
    case Metric::MsSsim: return "MS-SSIM";
  }
  return "?";
}

inline double get(const MetricBundle& b, Metric m) {
  switch (m) {
    case Metric::Psnr: return b.psnr;
    case Metric::Ssim: return b.ssim;
    case Metric::Vif: return b.vif;
    case Metric::MsSsim: return b.ms_ssim;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

struct Summary {
  int n = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();  // sample std, 0 for n = 1
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.n = static_cast<int>(v.size());
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / s.n;
  if (s.n == 1) {
    s.std = 0.0;
    return s;
  }
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / (s.n - 1));
  return s;
}

/// One table row: the corrupted inputs or one method's restorations.
struct ReportRow {
  std::string label;
  std::vector<std::string> ids;        // successful images only
  std::vector<MetricBundle> values;    // parallel to ids
  int total = 0;
  int failures = 0;

  std::vector<double> column(Metric m) const {
    std::vector<double> out;
    for (const auto& b : values) out.push_back(get(b, m));
    return out;
  }
};

struct PairedT {
  std::string method, reference;
  Metric metric = Metric::Psnr;
  int n = 0;
  double mean_diff = 0.0, sd_diff = 0.0;
  double t = std::numeric_limits<double>::quiet_NaN();
  double p_one_sided = std::numeric_limits<double>::quiet_NaN();
};

/// Paired one-sided t test of H1: mean(a - b) > 0 over images present in both
/// rows with finite values.
inline PairedT paired_t(const ReportRow& a, const ReportRow& b, Metric m) {
  PairedT r{a.label, b.label, m};
  std::vector<double> d;
  for (std::size_t i = 0; i < a.ids.size(); ++i)
    for (std::size_t k = 0; k < b.ids.size(); ++k)
      if (a.ids[i] == b.ids[k]) {
        const double x = get(a.values[i], m), y = get(b.values[k], m);
        if (std::isfinite(x) && std::isfinite(y)) d.push_back(x - y);
      }
  const Summary s = summarize(d);
  r.n = s.n;
  r.mean_diff = s.mean;
  r.sd_diff = s.std;
  if (s.n < 2) return r;
  if (s.std == 0.0) {
    r.t = s.mean > 0 ? std::numeric_limits<double>::infinity()
                     : (s.mean < 0 ? -std::numeric_limits<double>::infinity() : r.t);
    if (s.mean != 0.0) r.p_one_sided = s.mean > 0 ? 0.0 : 1.0;
    return r;
  }
  r.t = s.mean / (s.std / std::sqrt(static_cast<double>(s.n)));
  const boost::math::students_t dist(static_cast<double>(s.n - 1));
  r.p_one_sided = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

/// Rows for a set of paired runs: "Corrupted" first, then every method run.
inline std::vector<ReportRow> report_rows(const std::vector<RunReport>& runs) {
  require(!runs.empty(), "report: no runs");
  const auto& first = runs.front();
  for (const auto& r : runs) {
    require(!r.images.empty(), "report: run '" + r.spec.name + "' has no images");
    bool paired = r.images.size() == first.images.size() && r.spec.seed == first.spec.seed &&
                  r.spec.trajectory == first.spec.trajectory &&
                  r.spec.corruption.noise_snr_db == first.spec.corruption.noise_snr_db &&
                  r.spec.corruption.center_fraction == first.spec.corruption.center_fraction;
    for (std::size_t i = 0; paired && i < r.images.size(); ++i)
      paired = r.images[i].id == first.images[i].id && r.images[i].seed == first.images[i].seed;
    require(paired, "report: run '" + r.spec.name + "' is not paired with '" + first.spec.name +
                        "' (different images, seeds, trajectory or corruption)");
  }
  std::vector<ReportRow> rows;
  ReportRow corrupted{"Corrupted", {}, {}, static_cast<int>(first.images.size()), 0};
  for (const auto& im : first.images)
    if (im.ok) {
      corrupted.ids.push_back(im.id);
      corrupted.values.push_back(im.corrupted);
    }
  corrupted.failures = corrupted.total - static_cast<int>(corrupted.ids.size());
  rows.push_back(std::move(corrupted));
  for (const auto& r : runs) {
    if (r.spec.method == Method::None) continue;
    ReportRow row{display_name(r.spec.method), {}, {}, static_cast<int>(r.images.size()), r.failures};
    for (const auto& im : r.images)
      if (im.ok) {
        row.ids.push_back(im.id);
        row.values.push_back(im.refined);
      }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Every later row tested against every earlier row.
inline std::vector<PairedT> paired_tests(const std::vector<ReportRow>& rows) {
  std::vector<PairedT> out;
  for (std::size_t j = 1; j < rows.size(); ++j)
    for (std::size_t i = 0; i < j; ++i)
      for (Metric m : kReportMetrics) out.push_back(paired_t(rows[j], rows[i], m));
  return out;
}

namespace detail {

inline std::string fmt_num(double v, const char* f = "%.17g") {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline std::string csv_row(std::initializer_list<std::string> fields) {
  std::string out;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out += ',';
    out += csv_field(f);
    first = false;
  }
  return out + "\n";
}

}  // namespace detail

inline constexpr const char* kReportCsvHeader = "kind,method,reference,image,metric,n,value,std,t,p_one_sided";
inline constexpr int kReportCsvVersion = 1;

/// Long-format CSV: a schema row, per-image values, aggregates, failure
/// counts and paired t tests.
inline std::string report_csv(const std::vector<RunReport>& runs) {
  using detail::csv_row;
  using detail::fmt_num;
  const auto rows = report_rows(runs);
  std::string out = std::string(kReportCsvHeader) + "\n";
  out += csv_row({"schema", "afplus.report_csv", "", "", "", "", std::to_string(kReportCsvVersion), "", "", ""});
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.ids.size(); ++i)
      for (Metric m : kReportMetrics)
        out += csv_row({"image", r.label, "", r.ids[i], to_string(m), "1", fmt_num(get(r.values[i], m)), "", "", ""});
  for (const auto& r : rows) {
    for (Metric m : kReportMetrics) {
      const auto s = summarize(r.column(m));
      out += csv_row({"aggregate", r.label, "", "", to_string(m), std::to_string(s.n), fmt_num(s.mean),
                      fmt_num(s.std), "", ""});
    }
    out += csv_row({"failures", r.label, "", "", "", std::to_string(r.total), std::to_string(r.failures), "", "", ""});
  }
  for (const auto& t : paired_tests(rows))
    out += csv_row({"paired_t", t.method, t.reference, "", to_string(t.metric), std::to_string(t.n),
                    fmt_num(t.mean_diff), fmt_num(t.sd_diff), fmt_num(t.t), fmt_num(t.p_one_sided)});
  return out;
}

inline std::string report_markdown(const std::vector<RunReport>& runs) {
  using detail::fmt_num;
  const auto rows = report_rows(runs);
  auto cell = [](const Summary& s, Metric m) {
    if (s.n == 0 || std::isnan(s.mean)) return std::string("n/a");
    const char* f = m == Metric::Psnr ? "%.2f" : "%.4f";
    return fmt_num(s.mean, f) + " ± " + fmt_num(s.std, f);
  };
  std::string out = "| Method | PSNR | SSIM | VIF | MS-SSIM |\n|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out += "| " + r.label;
    for (Metric m : kReportMetrics) out += " | " + cell(summarize(r.column(m)), m);
    out += " |\n";
  }
  out += "\nImages: " + std::to_string(rows.front().total) + ". Failures:";
  for (std::size_t i = 0; i < rows.size(); ++i)
    out += std::string(i ? ", " : " ") + rows[i].label + " " + std::to_string(rows[i].failures);
  out += ".\n";
  const auto tests = paired_tests(rows);
  if (!tests.empty()) {
    out += "\nPaired one-sided t tests (H1: method mean > reference mean):\n\n";
    out += "| Method | Reference | Metric | n | Mean difference | t | p |\n|---|---|---|---|---|---|---|\n";
    for (const auto& t : tests) {
      if (t.n == 0) continue;
      out += "| " + t.method + " | " + t.reference + " | " + to_string(t.metric) + " | " + std::to_string(t.n) + " | " +
             fmt_num(t.mean_diff, "%.4g") + " | " + fmt_num(t.t, "%.3f") + " | " + fmt_num(t.p_one_sided, "%.3g") +
             " |\n";
    }
  }
  return out;
}

inline std::string render_report(const std::vector<RunReport>& runs, ReportFormat f) {
  return f == ReportFormat::Csv ? report_csv(runs) : report_markdown(runs);
}

}  // namespace afp
