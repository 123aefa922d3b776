#pragma once

// COS metrics (S-measure, weighted F-measure, MAE, mean E-measure) over
// grayscale predictions and CIS metrics (COCO-style AP) over instances.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iapf/core.hpp"

namespace iapf::metrics {

inline constexpr double kEps = 2.220446049250313e-16;  // MATLAB eps

struct CosScores {
  double s_alpha = 0;
  double f_beta_w = 0;
  double mae = 0;
  double e_phi_mean = 0;
};

struct CisScores {
  double ap = 0;
  double ap50 = 0;
  double ap75 = 0;
};

double mae(const GrayMask& pred, const BinaryMask& gt);

// alpha = 0.5 blend of the object-aware and region-aware terms.
double s_measure(const GrayMask& pred, const BinaryMask& gt, double alpha = 0.5);

double weighted_f_measure(const GrayMask& pred, const BinaryMask& gt, double beta2 = 1.0);

// Enhanced-alignment score of pred binarized at 256 thresholds t_k =
// (k + 0.5) / 256 (pred >= t_k), each averaged over pixels, then meaned.
double e_measure_mean(const GrayMask& pred, const BinaryMask& gt);

CosScores cos_scores(const GrayMask& pred, const BinaryMask& gt);

// Exact Euclidean distance transform: for every pixel, the squared distance
// to the nearest set pixel of `fg` and that pixel's index. Among equidistant
// set pixels the one with the smallest column, then smallest row, wins.
// Distances are -1 when `fg` is empty.
struct DistanceField {
  std::vector<std::int64_t> dist2;
  std::vector<std::size_t> nearest;
};
DistanceField distance_transform(const BinaryMask& fg);

// ---- instance AP -------------------------------------------------------

enum class IouKind { Mask, Box };

struct DetectionRecord {
  std::string image_id;
  double score = 0;
  BinaryMask mask;  // used for IouKind::Mask
  BBox box;         // used for IouKind::Box
};

struct InstanceGroundTruth {
  std::vector<BinaryMask> masks;
  std::vector<BBox> boxes;
};

using GroundTruthSet = std::map<std::string, InstanceGroundTruth>;

// COCO protocol: greedy score-ordered matching to the best unmatched ground
// truth with IoU >= threshold, 101-point interpolated precision.
double average_precision(std::span<const DetectionRecord> preds, const GroundTruthSet& gts,
                         IouKind kind, double threshold);

// AP over thresholds 0.50:0.05:0.95, plus AP50 and AP75.
CisScores instance_ap(std::span<const DetectionRecord> preds, const GroundTruthSet& gts,
                      IouKind kind);

// ---- dataset evaluation ---------------------------------------------------

struct CosRow {
  std::string id;
  CosScores scores;
};

struct CosTable {
  std::vector<CosRow> rows;  // sorted by id
  CosScores mean;
};

CosTable evaluate_cos(const std::filesystem::path& pred_dir,
                      const std::filesystem::path& gt_dir);
CisScores evaluate_cis(const std::filesystem::path& pred_dir,
                       const std::filesystem::path& gt_dir);
// Box AP at one IoU threshold. Boxes come from `<id>.boxes.json` when
// present; otherwise predictions fall back to `<id>.artifact.json` and
// ground truth to tight boxes of `<id>.inst.json` instances.
double evaluate_boxes(const std::filesystem::path& pred_dir,
                      const std::filesystem::path& gt_dir, double iou_threshold);

std::string format_cos_tsv(const CosTable& table);
std::string format_cis_tsv(const CisScores& scores);

// Instance payload shared by predictions and ground truth.
struct InstancePayload {
  int height = 0;
  int width = 0;
  std::vector<double> scores;
  std::vector<BinaryMask> masks;
};
InstancePayload read_instances(const std::filesystem::path& path);
void write_instances(const std::filesystem::path& path, const InstancePayload& payload);

}  // namespace iapf::metrics
