#include "iapf/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "iapf/io.hpp"

namespace iapf::metrics {

namespace fs = std::filesystem;
using io::json;

double mae(const GrayMask& pred, const BinaryMask& gt) {
  require_same_dims(pred.width, pred.height, gt.width, gt.height, "mae");
  if (pred.values.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    sum += std::abs(pred.values[i] - static_cast<double>(gt.bits[i]));
  }
  return sum / static_cast<double>(pred.values.size());
}

// ---- S-measure --------------------------------------------------------------

namespace {

// Mean and (N-1)-normalized standard deviation; sigma is 0 for N <= 1.
struct MeanStd {
  double mean = 0, stdev = 0;
};

double object_similarity(const MeanStd& s) {
  return 2.0 * s.mean / (s.mean * s.mean + 1.0 + s.stdev + kEps);
}

double structural_similarity(double x, double y, double sxx, double syy, double sxy) {
  const double alpha = 4.0 * x * y * sxy;
  const double beta = (x * x + y * y) * (sxx + syy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  if (beta == 0.0) return 1.0;
  return 0.0;
}

double object_term(const GrayMask& pred, const BinaryMask& gt, double fg_ratio) {
  // Foreground: pred on gt pixels. Background: 1 - pred on the rest.
  std::array<double, 2> sum{}, n{};
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const int c = gt.bits[i];
    sum[c] += c ? pred.values[i] : 1.0 - pred.values[i];
    n[c] += 1.0;
  }
  std::array<double, 2> mean{sum[0] / n[0], sum[1] / n[1]};
  std::array<double, 2> sq{};
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const int c = gt.bits[i];
    const double v = c ? pred.values[i] : 1.0 - pred.values[i];
    sq[c] += (v - mean[c]) * (v - mean[c]);
  }
  auto stats = [&](int c) {
    MeanStd s{mean[c], 0.0};
    if (n[c] > 1.0) s.stdev = std::sqrt(sq[c] / (n[c] - 1.0));
    return s;
  };
  return fg_ratio * object_similarity(stats(1)) +
         (1.0 - fg_ratio) * object_similarity(stats(0));
}

double region_term(const GrayMask& pred, const BinaryMask& gt) {
  const int w = gt.width, h = gt.height;
  // 1-based centroid, rounded half away from zero.
  double total = 0, sx = 0, sy = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!gt.at(x, y)) continue;
      total += 1;
      sx += x + 1;
      sy += y + 1;
    }
  }
  const int cx = static_cast<int>(std::round(sx / total));
  const int cy = static_cast<int>(std::round(sy / total));

  // Quadrants: 0 = top-left, 1 = top-right, 2 = bottom-left, 3 = bottom-right.
  auto quadrant = [&](int x, int y) { return (y >= cy ? 2 : 0) + (x >= cx ? 1 : 0); };
  std::array<double, 4> n{}, sp{}, sg{};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int q = quadrant(x, y);
      n[q] += 1;
      sp[q] += pred.at(x, y);
      sg[q] += gt.at(x, y);
    }
  }
  std::array<double, 4> mp{}, mg{};
  for (int q = 0; q < 4; ++q) {
    mp[q] = n[q] > 0 ? sp[q] / n[q] : 0.0;
    mg[q] = n[q] > 0 ? sg[q] / n[q] : 0.0;
  }
  std::array<double, 4> vpp{}, vgg{}, vpg{};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int q = quadrant(x, y);
      const double dp = pred.at(x, y) - mp[q];
      const double dg = gt.at(x, y) - mg[q];
      vpp[q] += dp * dp;
      vgg[q] += dg * dg;
      vpg[q] += dp * dg;
    }
  }
  const double area = static_cast<double>(w) * h;
  const double w1 = static_cast<double>(cx) * cy / area;
  const double w2 = static_cast<double>(w - cx) * cy / area;
  const double w3 = static_cast<double>(cx) * (h - cy) / area;
  const std::array<double, 4> weight{w1, w2, w3, 1.0 - w1 - w2 - w3};

  double score = 0;
  for (int q = 0; q < 4; ++q) {
    if (n[q] == 0) continue;  // empty quadrant has zero weight
    const double denom = n[q] - 1.0 + kEps;
    score += weight[q] *
             structural_similarity(mp[q], mg[q], vpp[q] / denom, vgg[q] / denom, vpg[q] / denom);
  }
  return score;
}

}  // namespace

double s_measure(const GrayMask& pred, const BinaryMask& gt, double alpha) {
  require_same_dims(pred.width, pred.height, gt.width, gt.height, "s_measure");
  if (pred.values.empty()) return 1.0;
  const double npx = static_cast<double>(pred.values.size());
  const double fg_ratio = static_cast<double>(gt.count()) / npx;
  const double pred_mean =
      std::accumulate(pred.values.begin(), pred.values.end(), 0.0) / npx;
  if (fg_ratio == 0.0) return 1.0 - pred_mean;
  if (fg_ratio == 1.0) return pred_mean;
  const double s = alpha * object_term(pred, gt, fg_ratio) + (1.0 - alpha) * region_term(pred, gt);
  return std::max(0.0, s);
}

// ---- distance transform ---------------------------------------------------------

namespace {

// Exact rational a/b with b > 0; `neg_inf` marks the envelope's left end.
struct Frac {
  std::int64_t num = 0, den = 1;
  bool neg_inf = false;
};

bool frac_le(const Frac& a, const Frac& b) {
  if (b.neg_inf) return a.neg_inf;
  if (a.neg_inf) return true;
  return static_cast<__int128>(a.num) * b.den <= static_cast<__int128>(b.num) * a.den;
}

}  // namespace

DistanceField distance_transform(const BinaryMask& fg) {
  const int w = fg.width, h = fg.height;
  const std::size_t npx = static_cast<std::size_t>(w) * h;
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();
  DistanceField out;
  out.dist2.assign(npx, -1);
  out.nearest.assign(npx, 0);
  if (fg.count() == 0) return out;

  // Pass 1, per column: nearest set pixel in the same column (upper wins ties).
  std::vector<std::int64_t> col_d2(npx, kInf);
  std::vector<int> col_row(npx, -1);
  for (int x = 0; x < w; ++x) {
    int last = -1;
    for (int y = 0; y < h; ++y) {
      if (fg.at(x, y)) last = y;
      if (last >= 0) {
        col_row[static_cast<std::size_t>(y) * w + x] = last;
        col_d2[static_cast<std::size_t>(y) * w + x] =
            static_cast<std::int64_t>(y - last) * (y - last);
      }
    }
    int next = -1;
    for (int y = h - 1; y >= 0; --y) {
      if (fg.at(x, y)) next = y;
      if (next < 0) continue;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const std::int64_t d2 = static_cast<std::int64_t>(next - y) * (next - y);
      if (d2 < col_d2[i]) {
        col_d2[i] = d2;
        col_row[i] = next;
      }
    }
  }

  // Pass 2, per row: lower envelope of parabolas (q - c)^2 + f(c); ties at a
  // query point resolve to the smaller column.
  std::vector<int> v(static_cast<std::size_t>(w));
  std::vector<Frac> z(static_cast<std::size_t>(w) + 1);
  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    auto f = [&](int c) { return col_d2[row + c]; };
    int k = -1;
    for (int c = 0; c < w; ++c) {
      if (f(c) == kInf) continue;
      if (k < 0) {
        k = 0;
        v[0] = c;
        z[0] = Frac{0, 1, true};
        continue;
      }
      Frac s;
      for (;;) {
        const int p = v[static_cast<std::size_t>(k)];
        s = Frac{(f(c) + std::int64_t{c} * c) - (f(p) + std::int64_t{p} * p),
                 2 * std::int64_t{c - p}, false};
        if (k == 0 || !frac_le(s, z[static_cast<std::size_t>(k)])) break;
        --k;
      }
      ++k;
      v[static_cast<std::size_t>(k)] = c;
      z[static_cast<std::size_t>(k)] = s;
    }
    const int last = k;
    k = 0;
    for (int q = 0; q < w; ++q) {
      while (k < last) {
        const Frac& b = z[static_cast<std::size_t>(k) + 1];
        if (static_cast<__int128>(b.num) < static_cast<__int128>(q) * b.den) {
          ++k;
        } else {
          break;
        }
      }
      const int c = v[static_cast<std::size_t>(k)];
      const std::size_t i = row + q;
      out.dist2[i] = static_cast<std::int64_t>(q - c) * (q - c) + f(c);
      out.nearest[i] = static_cast<std::size_t>(col_row[row + c]) * w + c;
    }
  }
  return out;
}

// ---- weighted F-measure -----------------------------------------------------------

namespace {

// 7x7 Gaussian (sigma 5) as a normalized 1-D factor; the 2-D kernel is its
// outer product.
std::array<double, 7> gaussian_factor() {
  std::array<double, 7> g{};
  double sum = 0;
  for (int i = -3; i <= 3; ++i) {
    g[static_cast<std::size_t>(i + 3)] = std::exp(-(i * i) / (2.0 * 25.0));
    sum += g[static_cast<std::size_t>(i + 3)];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Zero-padded separable filtering.
std::vector<double> gaussian_filter(const std::vector<double>& src, int w, int h) {
  static const auto g = gaussian_factor();
  std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int d = -3; d <= 3; ++d) {
        const int xx = x + d;
        if (xx < 0 || xx >= w) continue;
        acc += g[static_cast<std::size_t>(d + 3)] * src[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int d = -3; d <= 3; ++d) {
        const int yy = y + d;
        if (yy < 0 || yy >= h) continue;
        acc += g[static_cast<std::size_t>(d + 3)] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

}  // namespace

double weighted_f_measure(const GrayMask& pred, const BinaryMask& gt, double beta2) {
  require_same_dims(pred.width, pred.height, gt.width, gt.height, "weighted_f_measure");
  const std::size_t npx = gt.bits.size();
  const std::size_t n_fg = gt.count();
  if (n_fg == 0) return 0.0;

  const DistanceField dt = distance_transform(gt);
  std::vector<double> err(npx), err_t(npx);
  for (std::size_t i = 0; i < npx; ++i) err[i] = std::abs(pred.values[i] - gt.bits[i]);
  // Background pixels inherit the error of their nearest foreground pixel.
  for (std::size_t i = 0; i < npx; ++i) err_t[i] = gt.bits[i] ? err[i] : err[dt.nearest[i]];
  const std::vector<double> smoothed = gaussian_filter(err_t, gt.width, gt.height);

  const double decay = std::log(0.5) / 5.0;
  double fg_err = 0, bg_err = 0;
  for (std::size_t i = 0; i < npx; ++i) {
    if (gt.bits[i]) {
      fg_err += std::min(smoothed[i], err[i]);
    } else {
      const double importance = 2.0 - std::exp(decay * std::sqrt(static_cast<double>(dt.dist2[i])));
      bg_err += err[i] * importance;
    }
  }
  const double tp = static_cast<double>(n_fg) - fg_err;
  const double recall = 1.0 - fg_err / static_cast<double>(n_fg);
  const double precision = tp / (tp + bg_err + kEps);
  return (1.0 + beta2) * recall * precision / (recall + beta2 * precision + kEps);
}

// ---- E-measure --------------------------------------------------------------------

namespace {

// Number of thresholds t_k = (k + 0.5)/256 with value >= t_k.
int levels_passed(double value) {
  const double scaled = value * 256.0;
  if (scaled < 0.5) return 0;
  return static_cast<int>(std::min(256.0, std::floor(scaled - 0.5) + 1.0));
}

double enhanced(double a, double b) {
  const double align = 2.0 * a * b / (a * a + b * b + kEps);
  return (align + 1.0) * (align + 1.0) / 4.0;
}

}  // namespace

double e_measure_mean(const GrayMask& pred, const BinaryMask& gt) {
  require_same_dims(pred.width, pred.height, gt.width, gt.height, "e_measure_mean");
  const std::size_t npx = gt.bits.size();
  if (npx == 0) return 1.0;
  // hist[c][l]: pixels of gt class c passing exactly l thresholds.
  std::array<std::array<std::int64_t, 257>, 2> hist{};
  for (std::size_t i = 0; i < npx; ++i) ++hist[gt.bits[i]][levels_passed(pred.values[i])];

  const double n = static_cast<double>(npx);
  const std::int64_t gt_fg = std::accumulate(hist[1].begin(), hist[1].end(), std::int64_t{0});
  const double gt_mean = static_cast<double>(gt_fg) / n;

  double total = 0;
  std::int64_t fg_fg = 0, fg_bg = 0;  // pred fg among gt fg / gt bg at threshold k
  for (int l = 256; l >= 1; --l) {
    fg_fg += hist[1][static_cast<std::size_t>(l)];
    fg_bg += hist[0][static_cast<std::size_t>(l)];
  }
  // Walk thresholds k = 0..255; a pixel is foreground at k if it passes > k.
  for (int k = 0; k < 256; ++k) {
    if (k > 0) {
      fg_fg -= hist[1][static_cast<std::size_t>(k)];
      fg_bg -= hist[0][static_cast<std::size_t>(k)];
    }
    const std::int64_t pred_fg = fg_fg + fg_bg;
    double sum;
    if (gt_fg == 0) {
      sum = n - static_cast<double>(pred_fg);
    } else if (gt_fg == static_cast<std::int64_t>(npx)) {
      sum = static_cast<double>(pred_fg);
    } else {
      const double pred_mean = static_cast<double>(pred_fg) / n;
      const double pf = 1.0 - pred_mean, pb = -pred_mean;
      const double gf = 1.0 - gt_mean, gb = -gt_mean;
      const auto bg_fg = gt_fg - fg_fg;
      const auto bg_bg = static_cast<std::int64_t>(npx) - gt_fg - fg_bg;
      sum = static_cast<double>(fg_fg) * enhanced(pf, gf) +
            static_cast<double>(fg_bg) * enhanced(pf, gb) +
            static_cast<double>(bg_fg) * enhanced(pb, gf) +
            static_cast<double>(bg_bg) * enhanced(pb, gb);
    }
    total += sum / n;
  }
  return total / 256.0;
}

CosScores cos_scores(const GrayMask& pred, const BinaryMask& gt) {
  return CosScores{s_measure(pred, gt), weighted_f_measure(pred, gt), mae(pred, gt),
                   e_measure_mean(pred, gt)};
}

// ---- average precision -----------------------------------------------------------

namespace {

struct ImageMatches {
  std::vector<std::size_t> order;           // prediction indices, descending score
  std::vector<std::vector<double>> ious;    // [rank][gt]
  std::size_t n_gt = 0;
};

double iou_of(const DetectionRecord& d, const InstanceGroundTruth& g, std::size_t j,
              IouKind kind) {
  return kind == IouKind::Mask ? mask_iou(d.mask, g.masks[j]) : box_iou(d.box, g.boxes[j]);
}

std::size_t gt_count(const InstanceGroundTruth& g, IouKind kind) {
  return kind == IouKind::Mask ? g.masks.size() : g.boxes.size();
}

struct Prepared {
  std::vector<std::string> image_order;
  std::map<std::string, ImageMatches> images;
  std::size_t n_pos = 0;
};

Prepared prepare(std::span<const DetectionRecord> preds, const GroundTruthSet& gts,
                 IouKind kind) {
  Prepared p;
  for (const auto& [id, g] : gts) {
    p.images[id].n_gt = gt_count(g, kind);
    p.n_pos += gt_count(g, kind);
  }
  std::map<std::string, std::vector<std::size_t>> by_image;
  for (std::size_t i = 0; i < preds.size(); ++i) by_image[preds[i].image_id].push_back(i);
  static const InstanceGroundTruth kNone;
  for (auto& [id, idx] : by_image) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
    auto& m = p.images[id];
    const auto it = gts.find(id);
    const InstanceGroundTruth& g = it == gts.end() ? kNone : it->second;
    m.order = idx;
    for (std::size_t i : idx) {
      std::vector<double> row(m.n_gt);
      for (std::size_t j = 0; j < m.n_gt; ++j) row[j] = iou_of(preds[i], g, j, kind);
      m.ious.push_back(std::move(row));
    }
  }
  for (const auto& [id, m] : p.images) p.image_order.push_back(id);
  return p;
}

double ap_for_threshold(std::span<const DetectionRecord> preds, const Prepared& p,
                        double threshold) {
  if (p.n_pos == 0) return 0.0;
  struct Det {
    double score;
    bool tp;
  };
  std::vector<Det> dets;
  for (const auto& id : p.image_order) {
    const auto& m = p.images.at(id);
    std::vector<bool> taken(m.n_gt, false);
    for (std::size_t r = 0; r < m.order.size(); ++r) {
      double best = -1;
      std::size_t best_j = m.n_gt;
      for (std::size_t j = 0; j < m.n_gt; ++j) {
        if (taken[j]) continue;
        const double iou = m.ious[r][j];
        if (iou >= threshold && iou > best) {
          best = iou;
          best_j = j;
        }
      }
      if (best_j < m.n_gt) taken[best_j] = true;
      dets.push_back({preds[m.order[r]].score, best_j < m.n_gt});
    }
  }
  if (dets.empty()) return 0.0;
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Det& a, const Det& b) { return a.score > b.score; });

  std::vector<double> recall(dets.size()), precision(dets.size());
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    (dets[i].tp ? tp : fp) += 1;
    recall[i] = tp / static_cast<double>(p.n_pos);
    precision[i] = tp / (tp + fp);
  }
  for (std::size_t i = dets.size() - 1; i > 0; --i) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

}  // namespace

double average_precision(std::span<const DetectionRecord> preds, const GroundTruthSet& gts,
                         IouKind kind, double threshold) {
  return ap_for_threshold(preds, prepare(preds, gts, kind), threshold);
}

CisScores instance_ap(std::span<const DetectionRecord> preds, const GroundTruthSet& gts,
                      IouKind kind) {
  const Prepared p = prepare(preds, gts, kind);
  CisScores s;
  double sum = 0;
  for (int k = 10; k <= 19; ++k) {
    const double ap = ap_for_threshold(preds, p, k / 20.0);  // 0.50, 0.55, ..., 0.95
    sum += ap;
    if (k == 10) s.ap50 = ap;
    if (k == 15) s.ap75 = ap;
  }
  s.ap = sum / 10.0;
  return s;
}

// ---- dataset evaluation -------------------------------------------------------

namespace {

// Ids of files named `<id><suffix>` in `dir`, sorted.
std::vector<std::string> ids_with_suffix(const fs::path& dir, const std::string& suffix) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix)) {
      ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void check_pairing(const std::vector<std::string>& pred_ids,
                   const std::vector<std::string>& gt_ids) {
  for (const auto& id : gt_ids) {
    if (!std::binary_search(pred_ids.begin(), pred_ids.end(), id)) {
      throw Error(ErrorCode::MissingPrediction, id);
    }
  }
  for (const auto& id : pred_ids) {
    if (!std::binary_search(gt_ids.begin(), gt_ids.end(), id)) {
      throw Error(ErrorCode::MissingGroundTruth, id);
    }
  }
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<BBox> read_box_array(const fs::path& path) {
  const json j = io::read_json(path);
  const json& arr = j.is_object() && j.contains("boxes") ? j.at("boxes") : j;
  if (!arr.is_array()) throw Error(ErrorCode::FixtureCorrupt, path.string() + ": expected array");
  std::vector<BBox> out;
  for (const auto& b : arr) out.push_back(io::box_from_json(b));
  return out;
}

}  // namespace

InstancePayload read_instances(const fs::path& path) {
  const json j = io::read_json(path);
  InstancePayload p;
  try {
    p.height = j.at("size").at(0).get<int>();
    p.width = j.at("size").at(1).get<int>();
    for (const auto& inst : j.at("instances")) {
      p.scores.push_back(inst.value("score", 1.0));
      BinaryMask m = rle_decode(io::rle_from_json(inst.at("rle")));
      require_same_dims(m.width, m.height, p.width, p.height, path.string().c_str());
      p.masks.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FixtureCorrupt, path.string() + ": " + e.what());
  }
  return p;
}

void write_instances(const fs::path& path, const InstancePayload& payload) {
  json inst = json::array();
  for (std::size_t i = 0; i < payload.masks.size(); ++i) {
    inst.push_back({{"score", payload.scores[i]}, {"rle", io::rle_to_json(rle_encode(payload.masks[i]))}});
  }
  io::write_json(path, json{{"size", {payload.height, payload.width}}, {"instances", inst}});
}

CosTable evaluate_cos(const fs::path& pred_dir, const fs::path& gt_dir) {
  const auto gt_ids = ids_with_suffix(gt_dir, ".png");
  const auto pred_ids = ids_with_suffix(pred_dir, ".png");
  check_pairing(pred_ids, gt_ids);
  CosTable t;
  for (const auto& id : gt_ids) {
    const GrayMask pred = io::read_gray_mask(pred_dir / (id + ".png"));
    const BinaryMask gt = io::read_binary_mask(gt_dir / (id + ".png"));
    if (pred.width != gt.width || pred.height != gt.height) {
      throw Error(ErrorCode::DimensionMismatch, id);
    }
    t.rows.push_back({id, cos_scores(pred, gt)});
  }
  if (!t.rows.empty()) {
    const double n = static_cast<double>(t.rows.size());
    for (const auto& r : t.rows) {
      t.mean.s_alpha += r.scores.s_alpha;
      t.mean.f_beta_w += r.scores.f_beta_w;
      t.mean.mae += r.scores.mae;
      t.mean.e_phi_mean += r.scores.e_phi_mean;
    }
    t.mean.s_alpha /= n;
    t.mean.f_beta_w /= n;
    t.mean.mae /= n;
    t.mean.e_phi_mean /= n;
  }
  return t;
}

CisScores evaluate_cis(const fs::path& pred_dir, const fs::path& gt_dir) {
  const auto gt_ids = ids_with_suffix(gt_dir, ".inst.json");
  const auto pred_ids = ids_with_suffix(pred_dir, ".inst.json");
  check_pairing(pred_ids, gt_ids);
  GroundTruthSet gts;
  std::vector<DetectionRecord> preds;
  for (const auto& id : gt_ids) {
    auto g = read_instances(gt_dir / (id + ".inst.json"));
    auto p = read_instances(pred_dir / (id + ".inst.json"));
    if (g.width != p.width || g.height != p.height) throw Error(ErrorCode::DimensionMismatch, id);
    gts[id].masks = std::move(g.masks);
    for (std::size_t i = 0; i < p.masks.size(); ++i) {
      preds.push_back({id, p.scores[i], std::move(p.masks[i]), {}});
    }
  }
  return instance_ap(preds, gts, IouKind::Mask);
}

double evaluate_boxes(const fs::path& pred_dir, const fs::path& gt_dir, double iou_threshold) {
  auto collect = [](const fs::path& dir) {
    std::vector<std::string> ids = ids_with_suffix(dir, ".boxes.json");
    if (ids.empty()) ids = ids_with_suffix(dir, ".artifact.json");
    if (ids.empty()) ids = ids_with_suffix(dir, ".inst.json");
    return ids;
  };
  const auto gt_ids = collect(gt_dir);
  const auto pred_ids = collect(pred_dir);
  check_pairing(pred_ids, gt_ids);

  GroundTruthSet gts;
  std::vector<DetectionRecord> preds;
  for (const auto& id : gt_ids) {
    if (fs::exists(gt_dir / (id + ".boxes.json"))) {
      gts[id].boxes = read_box_array(gt_dir / (id + ".boxes.json"));
    } else {
      for (const auto& m : read_instances(gt_dir / (id + ".inst.json")).masks) {
        if (auto b = mask_bounds(m)) gts[id].boxes.push_back(*b);
      }
    }
    std::vector<BBox> boxes;
    if (fs::exists(pred_dir / (id + ".boxes.json"))) {
      boxes = read_box_array(pred_dir / (id + ".boxes.json"));
    } else if (fs::exists(pred_dir / (id + ".artifact.json"))) {
      const json a = io::read_json(pred_dir / (id + ".artifact.json"));
      for (const auto& b : a.at("final_boxes")) boxes.push_back(io::box_from_json(b));
    } else {
      throw Error(ErrorCode::MissingPrediction, id + " (no box source)");
    }
    for (const auto& b : boxes) preds.push_back({id, b.score, {}, b});
  }
  return average_precision(preds, gts, IouKind::Box, iou_threshold);
}

std::string format_cos_tsv(const CosTable& table) {
  std::string out = "id\ts_alpha\tf_beta_w\tmae\te_phi\n";
  auto row = [&](const std::string& id, const CosScores& s) {
    out += id + "\t" + fmt6(s.s_alpha) + "\t" + fmt6(s.f_beta_w) + "\t" + fmt6(s.mae) + "\t" +
           fmt6(s.e_phi_mean) + "\n";
  };
  for (const auto& r : table.rows) row(r.id, r.scores);
  row("MEAN", table.mean);
  return out;
}

std::string format_cis_tsv(const CisScores& s) {
  return "ap\tap50\tap75\n" + fmt6(s.ap) + "\t" + fmt6(s.ap50) + "\t" + fmt6(s.ap75) + "\n";
}

}  // namespace iapf::metrics
