#include "semloc/rerank.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <unordered_map>

#include "semloc/contrastive.hpp"
#include "semloc/error.hpp"
#include "semloc/parallel.hpp"
#include "semloc/pixelsim.hpp"
#include "semloc/text.hpp"

namespace semloc {

namespace fs = std::filesystem;

void RgbScoreTable::add(const std::string& query_id, const std::string& view_id, double score) {
    rows_[query_id].push_back({view_id, score});
}

void RgbScoreTable::finalize() {
    for (auto& [q, list] : rows_) {
        std::sort(list.begin(), list.end(), [](const RgbEntry& a, const RgbEntry& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.view_id < b.view_id;
        });
        std::set<std::string> seen;
        for (const auto& e : list) {
            if (!seen.insert(e.view_id).second) {
                throw Error(ErrorKind::duplicate_id, "view '" + e.view_id + "' scored twice for query '" + q + "'");
            }
        }
    }
}

const std::vector<RgbEntry>& RgbScoreTable::ranked(const std::string& query_id) const {
    auto it = rows_.find(query_id);
    if (it == rows_.end()) throw Error(ErrorKind::unknown_id, "query '" + query_id + "' has no RGB scores");
    return it->second;
}

RgbScoreTable RgbScoreTable::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open RGB score file " + path.string());
    RgbScoreTable table;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = text::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!header) {
            if (t != "query_id,view_id,score") {
                throw Error(ErrorKind::format, path.string() + ": expected header 'query_id,view_id,score'");
            }
            header = true;
            continue;
        }
        const auto cols = text::split(t, ',');
        if (cols.size() != 3) {
            throw Error(ErrorKind::format, path.string() + ":" + std::to_string(line_no) + ": expected 3 columns");
        }
        table.add(cols[0], cols[1], text::parse_double(cols[2], path.string() + ":" + std::to_string(line_no)));
    }
    if (!header) throw Error(ErrorKind::format, path.string() + ": missing header");
    table.finalize();
    return table;
}

void RgbScoreTable::save(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << "query_id,view_id,score\n";
    for (const auto& [q, list] : rows_) {
        for (const auto& e : list) out << q << ',' << e.view_id << ',' << text::format_double(e.score) << '\n';
    }
}

void RgbScoreTable::check_views(const Dataset& dataset) const {
    for (const auto& [q, list] : rows_) {
        for (const auto& e : list) dataset.view(e.view_id);
    }
}

SemanticScorer make_pixel_scorer(int width, int height) {
    return [width, height](const QueryRecord& q, const ViewRecord& v) {
        return pixelwise_similarity(resize_nearest(q.mask, width, height), resize_nearest(v.mask, width, height));
    };
}

namespace {

class EmbeddingCache {
public:
    explicit EmbeddingCache(std::shared_ptr<const nn::EmbeddingModel> model) : model_(std::move(model)) {}

    std::vector<double> compute(const SemanticMask& mask) const {
        const auto& in = model_->input_shape();
        return embed(*model_, resize_nearest(mask, in.w, in.h));
    }

    void preload(std::span<const ViewRecord> views, unsigned threads) {
        std::vector<std::vector<double>> out(views.size());
        parallel_for(views.size(), [&](std::size_t i) { out[i] = compute(views[i].mask); }, threads);
        for (std::size_t i = 0; i < views.size(); ++i) views_.emplace(views[i].id, std::move(out[i]));
    }

    std::vector<double> view(const ViewRecord& v) const {
        if (auto it = views_.find(v.id); it != views_.end()) return it->second;
        return compute(v.mask);
    }

    std::vector<double> query(const QueryRecord& q) const {
        {
            std::lock_guard lock(mutex_);
            if (auto it = queries_.find(q.id); it != queries_.end()) return it->second;
        }
        auto z = compute(q.mask);
        std::lock_guard lock(mutex_);
        queries_.emplace(q.id, z);
        return z;
    }

private:
    std::shared_ptr<const nn::EmbeddingModel> model_;
    std::unordered_map<std::string, std::vector<double>> views_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, std::vector<double>> queries_;
};

}  // namespace

SemanticScorer make_embed_scorer(std::shared_ptr<const nn::EmbeddingModel> model, std::span<const ViewRecord> views,
                                 unsigned threads) {
    if (!model) throw Error(ErrorKind::invalid_argument, "embedding scorer needs a model");
    auto cache = std::make_shared<EmbeddingCache>(std::move(model));
    cache->preload(views, threads);
    return [cache](const QueryRecord& q, const ViewRecord& v) { return dot(cache->query(q), cache->view(v)); };
}

std::vector<double> normalize_scores(std::span<const double> scores) {
    if (scores.empty()) return {};
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<double> out(scores.size(), 0.0);
    if (!(hi > lo)) return out;
    const double range = hi - lo;
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = 2.0 * (scores[i] - lo) / range - 1.0;
    return out;
}

std::vector<std::string> candidate_pool(const std::string& query_id, const RgbScoreTable& table,
                                        const Dataset& dataset, int top_s) {
    if (top_s < 1) throw Error(ErrorKind::invalid_argument, "S must be >= 1");
    const auto& ranked = table.ranked(query_id);
    const std::size_t s = std::min<std::size_t>(static_cast<std::size_t>(top_s), ranked.size());
    std::vector<std::string> pool;
    std::set<std::string> seen;
    std::vector<std::string> parents;
    for (std::size_t k = 0; k < s; ++k) {
        const auto& v = dataset.view(ranked[k].view_id);
        if (seen.insert(v.id).second) pool.push_back(v.id);
        if (std::find(parents.begin(), parents.end(), v.parent_pano) == parents.end()) parents.push_back(v.parent_pano);
    }
    for (const auto& parent : parents) {
        for (const auto& v : dataset.views) {
            if (v.parent_pano == parent && seen.insert(v.id).second) pool.push_back(v.id);
        }
    }
    return pool;
}

CandidateList fuse(const QueryRecord& query, std::span<const std::string> pool, const RgbScoreTable& table,
                   const Dataset& dataset, const SemanticScorer& scorer, double weight) {
    if (pool.empty()) throw Error(ErrorKind::invalid_argument, "candidate pool for '" + query.id + "' is empty");
    if (!(weight >= 0.0)) throw Error(ErrorKind::invalid_argument, "semantic weight must be >= 0");

    std::unordered_map<std::string, double> raw_rgb;
    for (const auto& e : table.ranked(query.id)) raw_rgb.emplace(e.view_id, e.score);

    CandidateList list;
    list.query_id = query.id;
    list.weight = weight;
    list.entries.resize(pool.size());
    bool any_scored = false;
    double pool_min = 0.0;
    for (const auto& id : pool) {
        if (auto it = raw_rgb.find(id); it != raw_rgb.end()) {
            pool_min = any_scored ? std::min(pool_min, it->second) : it->second;
            any_scored = true;
        }
    }
    if (!any_scored) throw Error(ErrorKind::invalid_argument, "no pool member of '" + query.id + "' has an RGB score");

    std::vector<double> rgb(pool.size());
    std::vector<double> sem(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto it = raw_rgb.find(pool[i]);
        rgb[i] = it != raw_rgb.end() ? it->second : pool_min;
        sem[i] = scorer(query, dataset.view(pool[i]));
    }
    const auto rgb_n = normalize_scores(rgb);
    const auto sem_n = normalize_scores(sem);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        list.entries[i] = {pool[i], rgb[i], rgb_n[i], sem[i], sem_n[i], rgb_n[i] + weight * sem_n[i]};
    }
    std::sort(list.entries.begin(), list.entries.end(), [](const Candidate& a, const Candidate& b) {
        if (a.fused != b.fused) return a.fused > b.fused;
        if (a.rgb_raw != b.rgb_raw) return a.rgb_raw > b.rgb_raw;
        return a.view_id < b.view_id;
    });
    return list;
}

RerankResults rerank_all(std::span<const QueryRecord> queries, const RgbScoreTable& table, const Dataset& dataset,
                         const SemanticScorer& scorer, double weight, int top_s, unsigned threads) {
    std::vector<CandidateList> lists(queries.size());
    parallel_for(
        queries.size(),
        [&](std::size_t i) {
            const auto pool = candidate_pool(queries[i].id, table, dataset, top_s);
            lists[i] = fuse(queries[i], pool, table, dataset, scorer, weight);
        },
        threads);
    RerankResults out;
    for (auto& l : lists) {
        const std::string id = l.query_id;
        if (!out.emplace(id, std::move(l)).second) throw Error(ErrorKind::duplicate_id, "query '" + id + "' repeated");
    }
    return out;
}

void save_results(const RerankResults& results, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << "query_id,rank,view_id,rgb_norm,sem_norm,fused\n";
    for (const auto& [q, list] : results) {
        for (std::size_t r = 0; r < list.entries.size(); ++r) {
            const auto& e = list.entries[r];
            out << q << ',' << (r + 1) << ',' << e.view_id << ',' << text::format_double(e.rgb_norm) << ','
                << text::format_double(e.sem_norm) << ',' << text::format_double(e.fused) << '\n';
        }
    }
}

RerankResults load_results(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open results " + path.string());
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != "query_id,rank,view_id,rgb_norm,sem_norm,fused") {
        throw Error(ErrorKind::format, path.string() + ": expected header 'query_id,rank,view_id,rgb_norm,sem_norm,fused'");
    }
    std::map<std::string, std::vector<std::pair<long long, Candidate>>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = text::trim(line);
        if (t.empty()) continue;
        const auto c = text::split(t, ',');
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (c.size() != 6) throw Error(ErrorKind::format, where + ": expected 6 columns");
        Candidate cand;
        cand.view_id = c[2];
        cand.rgb_norm = text::parse_double(c[3], where);
        cand.rgb_raw = cand.rgb_norm;
        cand.sem_norm = text::parse_double(c[4], where);
        cand.fused = text::parse_double(c[5], where);
        rows[c[0]].emplace_back(text::parse_int(c[1], where), std::move(cand));
    }
    RerankResults out;
    for (auto& [q, entries] : rows) {
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        CandidateList list;
        list.query_id = q;
        for (auto& [rank, cand] : entries) list.entries.push_back(std::move(cand));
        out.emplace(q, std::move(list));
    }
    return out;
}

}  // namespace semloc
