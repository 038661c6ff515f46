#include "maniloc/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "maniloc/errors.hpp"

namespace maniloc::metrics {

MaskGrid binarize(const PredictionMap& pred, double threshold) {
    MaskGrid out(pred.height, pred.width);
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x)
            out.values(y, x) = pred.values(y, x) >= threshold ? 1 : 0;
    return out;
}

double iou_binary(const MaskGrid& a, const MaskGrid& b) {
    if (a.height != b.height || a.width != b.width)
        throw ValidationError(ValidationCode::dimension_mismatch, "iou: mask shapes differ");
    std::int64_t intersection = 0, uni = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            const bool pa = a.values(y, x) != 0;
            const bool pb = b.values(y, x) != 0;
            intersection += pa && pb;
            uni += pa || pb;
        }
    if (uni == 0) return 1.0;
    return double(intersection) / double(uni);
}

double iou(const PredictionMap& pred, const MaskGrid& gt, double threshold) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ValidationError(ValidationCode::dimension_mismatch, "iou: pred/gt shapes differ");
    return iou_binary(binarize(pred, threshold), gt);
}

double dataset_iou(const std::vector<PredictionMap>& predictions,
                   const std::vector<MaskGrid>& masks, double threshold) {
    if (predictions.size() != masks.size() || predictions.empty())
        throw ValidationError(ValidationCode::invalid_argument,
                              "dataset_iou: need matching, non-empty prediction/mask lists");
    double sum = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) sum += iou(predictions[i], masks[i], threshold);
    return 100.0 * sum / double(predictions.size());
}

IdOodSummary aggregate_id_ood(const CrossGenMatrix& matrix) {
    const auto g = matrix.values.rows();
    if (g != matrix.values.cols())
        throw ValidationError(ValidationCode::invalid_argument, "cross matrix must be square");
    if (g < 2)
        throw ValidationError(ValidationCode::invalid_argument,
                              "id/ood aggregation needs at least 2 generators");
    IdOodSummary summary;
    double diag = 0, off = 0;
    for (Eigen::Index i = 0; i < g; ++i)
        for (Eigen::Index j = 0; j < g; ++j)
            (i == j ? diag : off) += matrix.values(i, j);
    summary.id_iou = diag / double(g);
    summary.ood_iou = off / double(g * (g - 1));
    return summary;
}

double average_precision(const std::vector<double>& scores, const std::vector<Label>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw ValidationError(ValidationCode::invalid_argument, "ap: scores/labels mismatch");
    std::int64_t positives = 0;
    for (const auto label : labels) positives += label == Label::fake;
    if (positives == 0 || positives == std::int64_t(labels.size()))
        throw ValidationError(ValidationCode::degenerate_labels,
                              "ap needs at least one positive and one negative");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    // AP = sum over positives of precision at their rank, / n_pos
    double ap = 0;
    std::int64_t tp = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (labels[order[rank]] == Label::fake) {
            ++tp;
            ap += double(tp) / double(rank + 1);
        }
    }
    return ap / double(positives);
}

std::vector<std::pair<std::string, double>> evaluate_manifest(const Predictor& predictor,
                                                              const DatasetManifest& manifest,
                                                              bool binarize_masks,
                                                              double threshold) {
    std::vector<std::pair<std::string, double>> per_image;
    for (const Sample* sample : manifest.fakes()) {
        PredictionMap pred = predictor(manifest, *sample);
        MaskGrid gt = load_mask(manifest.mask_file(*sample).string(), pred.height, pred.width,
                                binarize_masks);
        per_image.emplace_back(sample->image_path, iou(pred, gt, threshold));
    }
    return per_image;
}

CrossGenMatrix build_cross_matrix(const std::vector<std::string>& generators,
                                  const std::vector<Predictor>& predictors,
                                  const std::vector<DatasetManifest>& manifests,
                                  bool binarize_masks) {
    const std::size_t g = generators.size();
    if (predictors.size() != g || manifests.size() != g || g == 0)
        throw ValidationError(ValidationCode::invalid_argument,
                              "cross matrix needs one predictor and manifest per generator");
    CrossGenMatrix matrix;
    matrix.generators = generators;
    matrix.values.resize(Eigen::Index(g), Eigen::Index(g));
    for (std::size_t i = 0; i < g; ++i)
        for (std::size_t j = 0; j < g; ++j) {
            const auto per_image = evaluate_manifest(predictors[i], manifests[j], binarize_masks);
            if (per_image.empty())
                throw ValidationError(ValidationCode::invalid_argument,
                                      "manifest '" + generators[j] + "' has no fake samples");
            double sum = 0;
            for (const auto& [_, v] : per_image) sum += v;
            matrix.values(Eigen::Index(i), Eigen::Index(j)) =
                100.0 * sum / double(per_image.size());
        }
    return matrix;
}

void save_matrix_csv(const CrossGenMatrix& matrix, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write matrix csv: " + path);
    out << "train/test";
    for (const auto& tag : matrix.generators) out << "," << tag;
    out << "\n";
    out.precision(6);
    out << std::fixed;
    for (Eigen::Index i = 0; i < matrix.values.rows(); ++i) {
        out << matrix.generators[std::size_t(i)];
        for (Eigen::Index j = 0; j < matrix.values.cols(); ++j) out << "," << matrix.values(i, j);
        out << "\n";
    }
}

CrossGenMatrix load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(ValidationCode::missing_file, path);
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError(ValidationCode::malformed_record, "empty matrix csv: " + path);
    auto split_csv = [](const std::string& s) {
        std::vector<std::string> fields;
        std::stringstream stream(s);
        std::string field;
        while (std::getline(stream, field, ',')) fields.push_back(field);
        return fields;
    };
    const auto header = split_csv(line);
    if (header.size() < 2)
        throw ValidationError(ValidationCode::malformed_record, "matrix csv header too short");
    CrossGenMatrix matrix;
    matrix.generators.assign(header.begin() + 1, header.end());
    const auto g = Eigen::Index(matrix.generators.size());
    matrix.values.resize(g, g);
    for (Eigen::Index i = 0; i < g; ++i) {
        if (!std::getline(in, line))
            throw ValidationError(ValidationCode::malformed_record, "matrix csv truncated");
        const auto fields = split_csv(line);
        if (Eigen::Index(fields.size()) != g + 1 || fields[0] != matrix.generators[std::size_t(i)])
            throw ValidationError(ValidationCode::malformed_record,
                                  "matrix csv row/tag mismatch at line " + std::to_string(i + 2));
        for (Eigen::Index j = 0; j < g; ++j) {
            try {
                matrix.values(i, j) = std::stod(fields[std::size_t(j) + 1]);
            } catch (const std::exception&) {
                throw ValidationError(ValidationCode::malformed_record,
                                      "matrix csv bad number: " + fields[std::size_t(j) + 1]);
            }
        }
    }
    return matrix;
}

void save_summary_json(const IdOodSummary& summary, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write summary json: " + path);
    nlohmann::json doc{{"id_iou", summary.id_iou}, {"ood_iou", summary.ood_iou}};
    out << doc.dump(2) << "\n";
}

}  // namespace maniloc::metrics
