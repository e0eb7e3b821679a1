#include "semloc/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "semloc/error.hpp"
#include "semloc/text.hpp"

namespace semloc {

namespace fs = std::filesystem;

GroundTruth GroundTruth::from(const Dataset& dataset) {
    GroundTruth gt;
    for (const auto& q : dataset.queries) gt.queries.emplace(q.id, q.position);
    for (const auto& v : dataset.views) gt.views.emplace(v.id, dataset.panorama(v.parent_pano).position);
    return gt;
}

void EvalConfig::validate() const {
    if (n_values.empty() || thresholds_m.empty()) throw Error(ErrorKind::config, "N and threshold lists must be nonempty");
    for (std::size_t i = 0; i < n_values.size(); ++i) {
        if (n_values[i] < 1 || (i > 0 && n_values[i] <= n_values[i - 1])) {
            throw Error(ErrorKind::config, "N values must be positive and ascending");
        }
    }
    for (double t : thresholds_m) {
        if (!(t > 0.0)) throw Error(ErrorKind::config, "thresholds must be > 0");
    }
}

double recall_at_n(const RerankResults& results, const GroundTruth& truth, int n, double threshold_m) {
    if (n < 1) throw Error(ErrorKind::invalid_argument, "N must be >= 1");
    if (results.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& [qid, list] : results) {
        auto qit = truth.queries.find(qid);
        if (qit == truth.queries.end()) throw Error(ErrorKind::unknown_id, "query '" + qid + "' has no position");
        const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(n), list.entries.size());
        for (std::size_t k = 0; k < top; ++k) {
            auto vit = truth.views.find(list.entries[k].view_id);
            if (vit == truth.views.end()) {
                throw Error(ErrorKind::unknown_id, "view '" + list.entries[k].view_id + "' has no position");
            }
            if (distance(qit->second, vit->second) < threshold_m) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

void EvalReport::validate() const {
    std::map<std::pair<std::string, double>, std::vector<std::pair<int, double>>> by_threshold;
    std::map<std::pair<std::string, int>, std::vector<std::pair<double, double>>> by_n;
    for (const auto& r : rows) {
        if (r.recall < 0.0 || r.recall > 1.0) throw Error(ErrorKind::numeric, "recall outside [0, 1]");
        by_threshold[{r.method, r.threshold_m}].emplace_back(r.n, r.recall);
        by_n[{r.method, r.n}].emplace_back(r.threshold_m, r.recall);
    }
    auto check = [](auto& series, const char* axis) {
        for (auto& [key, points] : series) {
            std::sort(points.begin(), points.end());
            for (std::size_t i = 1; i < points.size(); ++i) {
                if (points[i].second < points[i - 1].second) {
                    throw Error(ErrorKind::numeric, std::string("recall decreases in ") + axis + " for method '" +
                                                        key.first + "'");
                }
            }
        }
    };
    check(by_threshold, "N");
    check(by_n, "threshold");
}

void EvalReport::save_csv(const fs::path& path) const {
    validate();
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    for (const auto& [k, v] : metadata) out << "# " << k << '=' << v << '\n';
    out << "method,N,threshold_m,recall\n";
    for (const auto& r : rows) {
        out << r.method << ',' << r.n << ',' << text::format_double(r.threshold_m) << ','
            << text::format_double(r.recall) << '\n';
    }
}

std::string EvalReport::to_text() const {
    std::vector<std::string> methods;
    std::set<int> ns;
    std::set<double> ths;
    for (const auto& r : rows) {
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
        ns.insert(r.n);
        ths.insert(r.threshold_m);
    }
    std::size_t width = 6;
    for (const auto& m : methods) width = std::max(width, m.size());
    std::ostringstream out;
    char buf[64];
    for (double th : ths) {
        std::snprintf(buf, sizeof buf, "threshold %g m\n", th);
        out << buf;
        out << std::string(width, ' ');
        for (int n : ns) {
            std::snprintf(buf, sizeof buf, "  R@%-4d", n);
            out << buf;
        }
        out << '\n';
        for (const auto& m : methods) {
            out << m << std::string(width - m.size(), ' ');
            for (int n : ns) {
                auto it = std::find_if(rows.begin(), rows.end(), [&](const EvalRow& r) {
                    return r.method == m && r.n == n && r.threshold_m == th;
                });
                if (it == rows.end()) {
                    out << "      - ";
                } else {
                    std::snprintf(buf, sizeof buf, "  %.4f", it->recall);
                    out << buf;
                }
            }
            out << '\n';
        }
    }
    return out.str();
}

void EvalReport::append(const EvalReport& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    for (const auto& [k, v] : other.metadata) metadata.emplace(k, v);
}

EvalReport evaluate(const RerankResults& results, const GroundTruth& truth, const std::string& method,
                    const EvalConfig& config) {
    config.validate();
    EvalReport report;
    for (double th : config.thresholds_m) {
        for (int n : config.n_values) report.rows.push_back({method, n, th, recall_at_n(results, truth, n, th)});
    }
    report.validate();
    return report;
}

std::vector<ThresholdPoint> threshold_curve(const RerankResults& results, const GroundTruth& truth, int n,
                                            std::span<const double> thresholds) {
    std::vector<ThresholdPoint> out;
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
            throw Error(ErrorKind::invalid_argument, "thresholds must be strictly ascending");
        }
        out.push_back({thresholds[i], recall_at_n(results, truth, n, thresholds[i])});
        if (i > 0 && out[i].recall < out[i - 1].recall) {
            throw Error(ErrorKind::numeric, "recall decreased along the threshold curve");
        }
    }
    return out;
}

void SweepTable::save_csv(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << parameter << ",N,threshold_m,recall,flag\n";
    for (const auto& r : rows) {
        out << text::format_double(r.value) << ',' << r.n << ',' << text::format_double(r.threshold_m) << ','
            << text::format_double(r.recall) << ',' << r.flag << '\n';
    }
}

std::string SweepTable::to_text() const {
    std::vector<double> values;
    std::set<int> ns;
    std::set<double> ths;
    for (const auto& r : rows) {
        if (values.empty() || values.back() != r.value) values.push_back(r.value);
        ns.insert(r.n);
        ths.insert(r.threshold_m);
    }
    std::ostringstream out;
    char buf[64];
    for (double th : ths) {
        std::snprintf(buf, sizeof buf, "threshold %g m\n%-10s", th, parameter.c_str());
        out << buf;
        for (int n : ns) {
            std::snprintf(buf, sizeof buf, "  R@%-4d", n);
            out << buf;
        }
        out << '\n';
        for (double v : values) {
            std::snprintf(buf, sizeof buf, "%-10.4g", v);
            out << buf;
            std::string flag;
            for (int n : ns) {
                auto it = std::find_if(rows.begin(), rows.end(), [&](const SweepRow& r) {
                    return r.value == v && r.n == n && r.threshold_m == th;
                });
                if (it == rows.end()) {
                    out << "      - ";
                    continue;
                }
                std::snprintf(buf, sizeof buf, "  %.4f", it->recall);
                out << buf;
                flag = it->flag;
            }
            if (!flag.empty()) out << "  [" << flag << ']';
            out << '\n';
        }
    }
    return out.str();
}

double SweepTable::recall(double value, int n, double threshold_m) const {
    for (const auto& r : rows) {
        if (r.value == value && r.n == n && r.threshold_m == threshold_m) return r.recall;
    }
    throw Error(ErrorKind::unknown_id, "no sweep row for " + parameter + "=" + text::format_double(value));
}

namespace {

void check_pipeline(const PipelineInputs& in) {
    if (!in.dataset || !in.table) throw Error(ErrorKind::invalid_argument, "pipeline needs a dataset and an RGB table");
    if (!in.scorer) throw Error(ErrorKind::invalid_argument, "pipeline needs a semantic scorer");
    in.eval.validate();
}

void append_rows(SweepTable& table, double value, const EvalReport& report, const std::string& flag) {
    for (const auto& r : report.rows) table.rows.push_back({value, r.n, r.threshold_m, r.recall, flag});
}

}  // namespace

SweepTable sweep_w(const PipelineInputs& inputs, std::span<const double> w_grid) {
    if (w_grid.empty()) throw Error(ErrorKind::invalid_argument, "W grid is empty");
    check_pipeline(inputs);
    std::vector<double> grid(w_grid.begin(), w_grid.end());
    if (std::find(grid.begin(), grid.end(), 0.0) == grid.end()) grid.insert(grid.begin(), 0.0);

    const GroundTruth truth = GroundTruth::from(*inputs.dataset);
    SweepTable table{"W", {}};
    for (double w : grid) {
        const auto results = rerank_all(inputs.dataset->queries, *inputs.table, *inputs.dataset, inputs.scorer, w,
                                        inputs.top_s, inputs.threads);
        append_rows(table, w, evaluate(results, truth, "W", inputs.eval), w == 0.0 ? "baseline" : "");
    }
    return table;
}

SweepTable sweep_crop_ratio(const CropSweepInputs& inputs, std::span<const double> ratio_grid) {
    if (ratio_grid.empty()) throw Error(ErrorKind::invalid_argument, "crop ratio grid is empty");
    for (double r : ratio_grid) {
        if (!(r > 0.0 && r <= 1.0)) throw Error(ErrorKind::config, "crop ratios must lie in (0, 1]");
    }
    PipelineInputs pipeline = inputs.pipeline;
    pipeline.scorer = [](const QueryRecord&, const ViewRecord&) { return 0.0; };
    check_pipeline(pipeline);

    const GroundTruth truth = GroundTruth::from(*pipeline.dataset);
    SweepTable table{"min_crop_ratio", {}};
    for (double ratio : ratio_grid) {
        TrainConfig cfg = inputs.train;
        cfg.augment.min_crop_ratio = ratio;
        const bool degenerate = ratio >= 1.0 && cfg.augment.max_rotation_deg == 0.0;
        auto trained = train(inputs.train_masks, cfg);
        auto model = std::make_shared<const nn::EmbeddingModel>(std::move(trained.model));
        const auto scorer = make_embed_scorer(model, pipeline.dataset->views, pipeline.threads);
        const auto results = rerank_all(pipeline.dataset->queries, *pipeline.table, *pipeline.dataset, scorer,
                                        inputs.weight, pipeline.top_s, pipeline.threads);
        append_rows(table, ratio, evaluate(results, truth, "crop", pipeline.eval), degenerate ? "degenerate" : "");
    }
    return table;
}

}  // namespace semloc
