#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "maniloc/manifest.hpp"
#include "maniloc/types.hpp"

namespace maniloc::metrics {

MaskGrid binarize(const PredictionMap& pred, double threshold = 0.5);

/// Intersection-over-union of the thresholded prediction against a binary
/// mask. Both-empty returns 1 (a correct "nothing manipulated" answer);
/// empty-vs-nonempty returns 0.
double iou(const PredictionMap& pred, const MaskGrid& gt, double threshold = 0.5);

double iou_binary(const MaskGrid& a, const MaskGrid& b);

/// Mean per-image IoU, in percent.
double dataset_iou(const std::vector<PredictionMap>& predictions,
                   const std::vector<MaskGrid>& masks, double threshold = 0.5);

/// Train-generator x test-generator IoU matrix (percent), row = train tag.
struct CrossGenMatrix {
    std::vector<std::string> generators;
    Mat<double> values;  // G x G
};

struct IdOodSummary {
    double id_iou = 0;
    double ood_iou = 0;
};

/// Diagonal mean (ID) and off-diagonal mean (OOD); requires G >= 2.
IdOodSummary aggregate_id_ood(const CrossGenMatrix& matrix);

/// Area under the precision-recall curve by step-wise interpolation over
/// stably descending-sorted scores. Returns a value in [0, 1]; requires at
/// least one positive and one negative label.
double average_precision(const std::vector<double>& scores, const std::vector<Label>& labels);

/// One predictor per train generator; entry (i, j) is predictor i evaluated
/// on manifest j over its fake samples.
using Predictor = std::function<PredictionMap(const DatasetManifest&, const Sample&)>;

CrossGenMatrix build_cross_matrix(const std::vector<std::string>& generators,
                                  const std::vector<Predictor>& predictors,
                                  const std::vector<DatasetManifest>& manifests,
                                  bool binarize_masks = false);

/// Per-image IoU of a predictor over a manifest's fake samples; ground truth
/// is loaded and nearest-neighbor resized to each prediction's resolution.
std::vector<std::pair<std::string, double>> evaluate_manifest(const Predictor& predictor,
                                                              const DatasetManifest& manifest,
                                                              bool binarize_masks = false,
                                                              double threshold = 0.5);

void save_matrix_csv(const CrossGenMatrix& matrix, const std::string& path);
CrossGenMatrix load_matrix_csv(const std::string& path);
void save_summary_json(const IdOodSummary& summary, const std::string& path);

}  // namespace maniloc::metrics
