#include "socs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "socs/error.hpp"

namespace socs {

namespace {

double pairs(double n) { return 0.5 * n * (n - 1.0); }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

double adjusted_rand_index(std::span<const std::int32_t> a, std::span<const std::int32_t> b) {
  if (a.size() != b.size()) throw ValidationError("adjusted_rand_index: label arrays differ in length");
  std::map<std::pair<std::int32_t, std::int32_t>, double> joint;
  std::map<std::int32_t, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [_, n] : joint) index += pairs(n);
  for (const auto& [_, n] : rows) sa += pairs(n);
  for (const auto& [_, n] : cols) sb += pairs(n);
  const double total = pairs(static_cast<double>(a.size()));
  if (total == 0.0) return 1.0;
  const double expected = sa * sb / total;
  const double denom = 0.5 * (sa + sb) - expected;
  // Both labelings trivial in the same way (all one cluster or all
  // singletons): identical partitions.
  if (denom == 0.0) return 1.0;
  return (index - expected) / denom;
}

AriResult ari_foreground(std::span<const std::int32_t> gt, std::span<const std::int32_t> predicted) {
  if (gt.size() != predicted.size()) {
    throw ValidationError("ari_foreground: " + std::to_string(gt.size()) + " ground-truth labels vs " +
                          std::to_string(predicted.size()) + " predicted");
  }
  std::vector<std::int32_t> a, b;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] > 0) {
      a.push_back(gt[i]);
      b.push_back(predicted[i]);
    }
  }
  if (a.empty()) return {0.0, true};
  return {adjusted_rand_index(a, b), false};
}

Centroid centroid_gt(std::span<const std::uint8_t> mask, int height, int width) {
  if (mask.size() != static_cast<std::size_t>(height) * width) throw ValidationError("centroid_gt: mask size mismatch");
  double r = 0.0, c = 0.0, n = 0.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (mask[static_cast<std::size_t>(y) * width + x] != 0) {
        r += y;
        c += x;
        n += 1.0;
      }
    }
  }
  if (n == 0.0) return {};
  return {r / n, c / n, true};
}

Centroid centroid_slot(std::span<const float> weights, int height, int width, std::size_t stride) {
  const std::size_t count = static_cast<std::size_t>(height) * width;
  if (count > 0 && (count - 1) * stride >= weights.size()) throw ValidationError("centroid_slot: weight size mismatch");
  double r = 0.0, c = 0.0, total = 0.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double w = weights[(static_cast<std::size_t>(y) * width + x) * stride];
      r += w * y;
      c += w * x;
      total += w;
    }
  }
  if (!(total > 0.0)) return {};
  return {r / total, c / total, true};
}

Assignment hungarian_match(const std::vector<double>& cost, int rows, int cols) {
  if (cost.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw ValidationError("hungarian_match: cost has " + std::to_string(cost.size()) + " entries, expected " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  Assignment out;
  out.column_of_row.assign(static_cast<std::size_t>(std::max(rows, 0)), -1);
  if (rows == 0 || cols == 0) return out;

  double largest = 0.0;
  for (double v : cost) {
    if (std::isfinite(v)) largest = std::max(largest, std::abs(v));
  }
  const double sentinel = 1e6 * (largest + 1.0);
  const bool transpose = rows > cols;
  const int n = transpose ? cols : rows;
  const int m = transpose ? rows : cols;
  auto at = [&](int i, int j) {
    const double v = transpose ? cost[static_cast<std::size_t>(j) * cols + i] : cost[static_cast<std::size_t>(i) * cols + j];
    return std::isfinite(v) ? v : sentinel;
  };

  // Shortest augmenting path with potentials, O(n^2 m); 1-based.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(m) + 1, 0), way(static_cast<std::size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = at(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  for (int j = 1; j <= m; ++j) {
    const int i = p[static_cast<std::size_t>(j)];
    if (i == 0) continue;
    if (transpose) {
      out.column_of_row[static_cast<std::size_t>(j - 1)] = i - 1;
    } else {
      out.column_of_row[static_cast<std::size_t>(i - 1)] = j - 1;
    }
  }
  for (int r = 0; r < rows; ++r) {
    const int c = out.column_of_row[static_cast<std::size_t>(r)];
    if (c >= 0) out.cost += cost[static_cast<std::size_t>(r) * cols + c];
  }
  return out;
}

ComResult com_tracking(const Tensor<std::int32_t>& gt, const Tensor<float>& soft, const ComOptions& options) {
  if (gt.rank() != 4 || soft.rank() != 5 || !std::equal(gt.shape.begin(), gt.shape.end(), soft.shape.begin())) {
    throw ValidationError("com_tracking: masks " + shape_string(gt.shape) + " and soft masks " +
                          shape_string(soft.shape) + " are not aligned");
  }
  const int V = gt.dim(0), F = gt.dim(1), H = gt.dim(2), W = gt.dim(3), K = soft.dim(4);
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  const double diagonal = std::sqrt(static_cast<double>(H) * H + static_cast<double>(W) * W);
  const double min_pixels = options.min_pixel_fraction * static_cast<double>(hw);

  ComResult out;
  double distance_sum = 0.0;
  for (int v = 0; v < V; ++v) {
    // centroids[f][instance] for qualifying instances, slot centroids per frame.
    std::vector<std::map<std::int32_t, Centroid>> gt_c(static_cast<std::size_t>(F));
    std::vector<std::vector<Centroid>> slot_c(static_cast<std::size_t>(F), std::vector<Centroid>(static_cast<std::size_t>(K)));
    std::set<std::int32_t> instances;
    for (int f = 0; f < F; ++f) {
      const std::size_t base = (static_cast<std::size_t>(v) * F + f) * hw;
      std::map<std::int32_t, std::array<double, 3>> acc;
      for (std::size_t p = 0; p < hw; ++p) {
        const std::int32_t id = gt.data[base + p];
        if (id <= 0) continue;
        auto& a = acc[id];
        a[0] += static_cast<double>(p / static_cast<std::size_t>(W));
        a[1] += static_cast<double>(p % static_cast<std::size_t>(W));
        a[2] += 1.0;
      }
      for (const auto& [id, a] : acc) {
        if (a[2] > min_pixels) {
          gt_c[static_cast<std::size_t>(f)][id] = {a[0] / a[2], a[1] / a[2], true};
          instances.insert(id);
        }
      }
      const std::span<const float> frame(soft.data.data() + base * static_cast<std::size_t>(K), hw * K);
      for (int k = 0; k < K; ++k) {
        slot_c[static_cast<std::size_t>(f)][static_cast<std::size_t>(k)] =
            centroid_slot(frame.subspan(static_cast<std::size_t>(k)), H, W, static_cast<std::size_t>(K));
      }
    }
    if (instances.empty()) continue;
    const std::vector<std::int32_t> ids(instances.begin(), instances.end());
    auto dist = [&](int f, std::int32_t id, int k) {
      const Centroid& a = gt_c[static_cast<std::size_t>(f)].at(id);
      const Centroid& b = slot_c[static_cast<std::size_t>(f)][static_cast<std::size_t>(k)];
      if (!b.present) return diagonal;
      return std::hypot(a.row - b.row, a.col - b.col);
    };

    if (options.per_frame_matching) {
      for (int f = 0; f < F; ++f) {
        const auto& present = gt_c[static_cast<std::size_t>(f)];
        if (present.empty()) continue;
        std::vector<std::int32_t> fid;
        for (const auto& [id, _] : present) fid.push_back(id);
        std::vector<double> cost(fid.size() * static_cast<std::size_t>(K));
        for (std::size_t i = 0; i < fid.size(); ++i) {
          for (int k = 0; k < K; ++k) cost[i * K + k] = dist(f, fid[i], k);
        }
        const Assignment as = hungarian_match(cost, static_cast<int>(fid.size()), K);
        for (std::size_t i = 0; i < fid.size(); ++i) {
          const int k = as.column_of_row[i];
          distance_sum += k >= 0 ? dist(f, fid[i], k) : diagonal;
          out.samples += 1;
          if (k >= 0) out.matches.push_back({v, f, fid[i], k});
        }
      }
      continue;
    }

    std::vector<double> cost(ids.size() * static_cast<std::size_t>(K), 0.0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (int k = 0; k < K; ++k) {
        double s = 0.0;
        int n = 0;
        for (int f = 0; f < F; ++f) {
          if (gt_c[static_cast<std::size_t>(f)].count(ids[i]) == 0) continue;
          s += dist(f, ids[i], k);
          ++n;
        }
        cost[i * K + k] = s / n;
      }
    }
    const Assignment as = hungarian_match(cost, static_cast<int>(ids.size()), K);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const int k = as.column_of_row[i];
      if (k >= 0) out.matches.push_back({v, -1, ids[i], k});
      for (int f = 0; f < F; ++f) {
        if (gt_c[static_cast<std::size_t>(f)].count(ids[i]) == 0) continue;
        distance_sum += k >= 0 ? dist(f, ids[i], k) : diagonal;
        out.samples += 1;
      }
    }
  }
  if (out.samples > 0) {
    out.valid = true;
    out.percent = 100.0 * distance_sum / static_cast<double>(out.samples) / diagonal;
  }
  return out;
}

SequenceMetrics score_segmentation(const Tensor<std::int32_t>& gt, const SegmentationResult& seg,
                                   const ComOptions& options) {
  if (gt.shape != seg.hard_labels.shape) {
    throw ValidationError("instance_masks " + shape_string(gt.shape) + " do not match segmentation " +
                          shape_string(seg.hard_labels.shape));
  }
  SequenceMetrics m;
  const AriResult ari = ari_foreground(gt.span(), seg.hard_labels.span());
  m.ari_f = ari.value;
  m.ari_degenerate = ari.degenerate;
  const ComResult com = com_tracking(gt, seg.soft_masks, options);
  m.com_percent = com.percent;
  m.com_valid = com.valid;
  m.matches = com.matches;
  std::set<std::int32_t> ids;
  for (auto id : gt.data) {
    if (id > 0) ids.insert(id);
  }
  m.instance_count = ids.size();
  return m;
}

MeanSem mean_sem(std::span<const double> values) {
  MeanSem out;
  out.count = values.size();
  if (values.empty()) return out;
  double s = 0.0;
  for (double v : values) s += v;
  out.mean = s / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    const double n = static_cast<double>(values.size());
    out.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    out.sem_defined = true;
  }
  return out;
}

MetricsReport aggregate(std::vector<SequenceMetrics> sequences) {
  MetricsReport r;
  std::vector<double> ari, com;
  for (const auto& s : sequences) {
    if (!s.ari_degenerate) ari.push_back(s.ari_f);
    if (s.com_valid) com.push_back(s.com_percent);
  }
  r.ari_f = mean_sem(ari);
  r.com_percent = mean_sem(com);
  r.sequences = std::move(sequences);
  return r;
}

MetricsReport evaluate_model(const SocsModel<float>& model, const DatasetManifest& manifest,
                             const ComOptions& options) {
  std::vector<SequenceMetrics> seqs;
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto path = manifest.resolve(i);
    const SequenceRecord rec = read_record(path);
    bool has_fg = false;
    for (auto id : rec.instance_masks.data) has_fg = has_fg || id > 0;
    if (rec.instance_masks.size() == 0 || !has_fg) {
      warnings.push_back(path.string() + ": no foreground instance masks, skipped");
      std::cerr << "warning: " << warnings.back() << "\n";
      continue;
    }
    SequenceMetrics m = score_segmentation(rec.instance_masks, model.segment(rec), options);
    m.name = manifest.entries[i].path.string();
    seqs.push_back(std::move(m));
  }
  MetricsReport r = aggregate(std::move(seqs));
  r.warnings = std::move(warnings);
  return r;
}

MetricsReport combine_runs(const std::vector<MetricsReport>& runs) {
  std::vector<double> ari, com;
  MetricsReport out;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    ari.push_back(runs[i].ari_f.mean);
    if (runs[i].com_percent.count > 0) com.push_back(runs[i].com_percent.mean);
    SequenceMetrics s;
    s.name = "run." + std::to_string(i);
    s.ari_f = runs[i].ari_f.mean;
    s.com_percent = runs[i].com_percent.mean;
    s.com_valid = runs[i].com_percent.count > 0;
    out.sequences.push_back(s);
    for (const auto& w : runs[i].warnings) out.warnings.push_back(w);
  }
  out.ari_f = mean_sem(ari);
  out.com_percent = mean_sem(com);
  return out;
}

std::string MetricsReport::summary_line() const {
  auto sem = [](const MeanSem& m) { return m.sem_defined ? fixed(m.sem, 3) : std::string("n/a"); };
  return "ARI-F " + fixed(ari_f.mean, 3) + " ± " + sem(ari_f) + "  CoM " + fixed(com_percent.mean, 2) + "% ± " +
         sem(com_percent);
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << "# " << summary_line() << "\n";
  os << "ari_f.mean = " << format_double(ari_f.mean) << "\n";
  os << "ari_f.sem = " << (ari_f.sem_defined ? format_double(ari_f.sem) : "undefined") << "\n";
  os << "ari_f.count = " << ari_f.count << "\n";
  os << "com_percent.mean = " << format_double(com_percent.mean) << "\n";
  os << "com_percent.sem = " << (com_percent.sem_defined ? format_double(com_percent.sem) : "undefined") << "\n";
  os << "com_percent.count = " << com_percent.count << "\n";
  os << "sequences = " << sequences.size() << "\n";
  for (const auto& w : warnings) os << "# warning: " << w << "\n";
  os << "\n# name\tari_f\tcom_percent\tinstances\tmatches(camera:instance->slot)\n";
  for (const auto& s : sequences) {
    os << s.name << "\t" << (s.ari_degenerate ? std::string("degenerate") : format_double(s.ari_f)) << "\t"
       << (s.com_valid ? format_double(s.com_percent) : std::string("none")) << "\t" << s.instance_count << "\t";
    for (std::size_t i = 0; i < s.matches.size(); ++i) {
      const auto& m = s.matches[i];
      os << (i ? "," : "") << m.camera << ":" << m.instance << "->" << m.slot;
      if (m.frame >= 0) os << "@" << m.frame;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace socs
