#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "moff/prediction.hpp"

namespace moff {

// Binary confusion counts. "not_as_off" is a gold NOT predicted OFF, and
// "off_as_not" the reverse.
struct ConfusionMatrix {
  std::uint64_t tp_not = 0;
  std::uint64_t not_as_off = 0;
  std::uint64_t off_as_not = 0;
  std::uint64_t tp_off = 0;

  std::uint64_t support_not() const { return tp_not + not_as_off; }
  std::uint64_t support_off() const { return off_as_not + tp_off; }
  std::uint64_t total() const { return support_not() + support_off(); }
};

inline ConfusionMatrix confusion(std::span<const Label> preds, std::span<const Label> golds) {
  if (preds.size() != golds.size())
    throw std::invalid_argument("confusion: prediction/gold length mismatch");
  if (preds.empty()) throw std::invalid_argument("confusion: empty inputs");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (golds[i] == Label::kNot) {
      ++(preds[i] == Label::kNot ? cm.tp_not : cm.not_as_off);
    } else {
      ++(preds[i] == Label::kNot ? cm.off_as_not : cm.tp_off);
    }
  }
  return cm;
}

struct MetricRow {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct ClassificationReport {
  MetricRow cls_not, cls_off, micro_avg, macro_avg, weighted_avg;
  // Set when a class was never predicted; its precision is reported as 0.
  bool zero_precision_flag = false;
};

namespace detail {

inline double safe_div(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

inline double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace detail

// All values are kept exact; rounding happens only at display time.
inline ClassificationReport report(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("report: empty confusion matrix");
  const std::uint64_t pred_not = cm.tp_not + cm.off_as_not;
  const std::uint64_t pred_off = cm.tp_off + cm.not_as_off;

  ClassificationReport r;
  r.zero_precision_flag = pred_not == 0 || pred_off == 0;

  r.cls_not.precision = detail::safe_div(cm.tp_not, pred_not);
  r.cls_not.recall = detail::safe_div(cm.tp_not, cm.support_not());
  r.cls_not.f1 = detail::f1_of(r.cls_not.precision, r.cls_not.recall);
  r.cls_not.support = cm.support_not();

  r.cls_off.precision = detail::safe_div(cm.tp_off, pred_off);
  r.cls_off.recall = detail::safe_div(cm.tp_off, cm.support_off());
  r.cls_off.f1 = detail::f1_of(r.cls_off.precision, r.cls_off.recall);
  r.cls_off.support = cm.support_off();

  // Binary single-label micro statistics all collapse to accuracy.
  const double accuracy = detail::safe_div(cm.tp_not + cm.tp_off, total);
  r.micro_avg = {accuracy, accuracy, accuracy, total};

  r.macro_avg.precision = (r.cls_not.precision + r.cls_off.precision) / 2.0;
  r.macro_avg.recall = (r.cls_not.recall + r.cls_off.recall) / 2.0;
  r.macro_avg.f1 = (r.cls_not.f1 + r.cls_off.f1) / 2.0;
  r.macro_avg.support = total;

  const double wn = static_cast<double>(cm.support_not());
  const double wo = static_cast<double>(cm.support_off());
  const double tot = static_cast<double>(total);
  r.weighted_avg.precision = (wn * r.cls_not.precision + wo * r.cls_off.precision) / tot;
  r.weighted_avg.recall = (wn * r.cls_not.recall + wo * r.cls_off.recall) / tot;
  r.weighted_avg.f1 = (wn * r.cls_not.f1 + wo * r.cls_off.f1) / tot;
  r.weighted_avg.support = total;
  return r;
}

// Round half up at two decimals; the cell value is built from the scaled
// integer so no second rounding can creep in.
inline std::string format_2dp(double v) {
  const long long k = static_cast<long long>(std::floor(v * 100.0 + 0.5));
  std::string frac = std::to_string(k % 100);
  if (frac.size() < 2) frac.insert(frac.begin(), '0');
  return std::to_string(k / 100) + "." + frac;
}

namespace detail {

inline void pad_left(std::string& out, std::string_view text, std::size_t width) {
  if (text.size() < width) out.append(width - text.size(), ' ');
  out.append(text);
}

inline void report_row(std::string& out, std::string_view label, const MetricRow& row) {
  pad_left(out, label, 12);
  out.push_back(' ');
  for (double v : {row.precision, row.recall, row.f1}) {
    out.push_back(' ');
    pad_left(out, format_2dp(v), 9);
  }
  out.push_back(' ');
  pad_left(out, std::to_string(row.support), 9);
  out.push_back('\n');
}

inline std::string exact_decimal(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Fixed-width text table: one row per class, then micro, macro and weighted
// averages, with every cell rounded half up to two decimals.
inline std::string render_report(const ClassificationReport& r) {
  std::string out;
  detail::pad_left(out, "", 12);
  out.push_back(' ');
  for (std::string_view h : {"precision", "recall", "f1-score", "support"}) {
    out.push_back(' ');
    detail::pad_left(out, h, 9);
  }
  out += "\n\n";
  detail::report_row(out, "NOT", r.cls_not);
  detail::report_row(out, "OFF", r.cls_off);
  out.push_back('\n');
  detail::report_row(out, "micro avg", r.micro_avg);
  detail::report_row(out, "macro avg", r.macro_avg);
  detail::report_row(out, "weighted avg", r.weighted_avg);
  if (r.zero_precision_flag)
    out += "\nnote: precision reported as zero for labels with no predicted samples\n";
  return out;
}

// Machine-readable variant with unrounded values.
inline std::string report_tsv(const ClassificationReport& r) {
  std::string out = "label\tprecision\trecall\tf1\tsupport\n";
  const auto row = [&out](std::string_view label, const MetricRow& m) {
    out.append(label);
    out.push_back('\t');
    out += detail::exact_decimal(m.precision);
    out.push_back('\t');
    out += detail::exact_decimal(m.recall);
    out.push_back('\t');
    out += detail::exact_decimal(m.f1);
    out.push_back('\t');
    out += std::to_string(m.support);
    out.push_back('\n');
  };
  row("NOT", r.cls_not);
  row("OFF", r.cls_off);
  row("micro avg", r.micro_avg);
  row("macro avg", r.macro_avg);
  row("weighted avg", r.weighted_avg);
  return out;
}

}  // namespace moff
