#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "socs/dataset_io.hpp"
#include "socs/model.hpp"

namespace socs {

struct AriResult {
  double value = 0.0;
  /// No foreground pixels; value is reported as 0.
  bool degenerate = false;
};

/// ARI between ground-truth instance ids and predicted labels over pixels
/// whose ground-truth id is > 0.
AriResult ari_foreground(std::span<const std::int32_t> gt, std::span<const std::int32_t> predicted);

/// Adjusted Rand Index of two labelings over all given elements.
double adjusted_rand_index(std::span<const std::int32_t> a, std::span<const std::int32_t> b);

struct Centroid {
  double row = 0.0;
  double col = 0.0;
  bool present = false;  // false: empty mask or zero weight
};

/// Mean (row, col) of the non-zero pixels of a [H, W] mask.
Centroid centroid_gt(std::span<const std::uint8_t> mask, int height, int width);
/// Weighted mean (row, col); weight of pixel p is weights[p * stride].
Centroid centroid_slot(std::span<const float> weights, int height, int width, std::size_t stride = 1);

struct Assignment {
  /// Column matched to each row, or -1 when rows outnumber columns.
  std::vector<int> column_of_row;
  double cost = 0.0;
};

/// Minimum-cost one-to-one assignment for a row-major [rows, cols] cost
/// matrix. Non-finite entries are invalid pairs and get a large sentinel cost.
Assignment hungarian_match(const std::vector<double>& cost, int rows, int cols);

struct MatchedPair {
  int camera = 0;
  int frame = -1;  // -1 when matched once per camera
  int instance = 0;
  int slot = 0;
};

struct ComOptions {
  double min_pixel_fraction = 0.0005;
  /// Match each frame separately instead of once per camera.
  bool per_frame_matching = false;
};

struct ComResult {
  double percent = 0.0;
  /// False when no instance passed the size threshold in any frame.
  bool valid = false;
  std::size_t samples = 0;  // (instance, frame) pairs averaged
  std::vector<MatchedPair> matches;
};

/// gt [V, F, H, W] instance ids, soft [V, F, H, W, K].
ComResult com_tracking(const Tensor<std::int32_t>& gt, const Tensor<float>& soft, const ComOptions& options = {});

struct SequenceMetrics {
  std::string name;
  double ari_f = 0.0;
  bool ari_degenerate = false;
  double com_percent = 0.0;
  bool com_valid = false;
  std::size_t instance_count = 0;
  std::vector<MatchedPair> matches;
};

SequenceMetrics score_segmentation(const Tensor<std::int32_t>& gt, const SegmentationResult& seg,
                                   const ComOptions& options = {});

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;
  bool sem_defined = false;  // needs >= 2 samples
  std::size_t count = 0;
};

MeanSem mean_sem(std::span<const double> values);

struct MetricsReport {
  MeanSem ari_f;
  MeanSem com_percent;
  std::vector<SequenceMetrics> sequences;
  std::vector<std::string> warnings;

  /// `ARI-F <mean> ± <sem>  CoM <mean>% ± <sem>`
  std::string summary_line() const;
  /// Key/value header followed by a per-sequence table.
  std::string to_text() const;
};

/// Means over sequences; CoM averages only sequences with a valid value.
MetricsReport aggregate(std::vector<SequenceMetrics> sequences);

/// Segments every sequence in the manifest with posterior means and scores it.
MetricsReport evaluate_model(const SocsModel<float>& model, const DatasetManifest& manifest,
                             const ComOptions& options = {});

/// Mean and standard error of per-run means (e.g. one report per seed).
MetricsReport combine_runs(const std::vector<MetricsReport>& runs);

}  // namespace socs
