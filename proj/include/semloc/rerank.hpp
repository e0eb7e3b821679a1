#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "semloc/dataset.hpp"
#include "semloc/nn.hpp"

namespace semloc {

struct RgbEntry {
    std::string view_id;
    double score = 0.0;
};

/// Raw retrieval scores of an external RGB method, ranked descending per query.
class RgbScoreTable {
public:
    /// Adds one row; ranking is restored by finalize().
    void add(const std::string& query_id, const std::string& view_id, double score);
    /// Sorts every list by score descending, then view id.
    void finalize();

    bool contains(const std::string& query_id) const { return rows_.count(query_id) != 0; }
    const std::vector<RgbEntry>& ranked(const std::string& query_id) const;
    const std::map<std::string, std::vector<RgbEntry>>& rows() const noexcept { return rows_; }

    /// `query_id,view_id,score` with header.
    static RgbScoreTable load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    /// Throws unless every view id exists in `dataset`.
    void check_views(const Dataset& dataset) const;

private:
    std::map<std::string, std::vector<RgbEntry>> rows_;
};

struct Candidate {
    std::string view_id;
    double rgb_raw = 0.0;
    double rgb_norm = 0.0;
    double sem_raw = 0.0;
    double sem_norm = 0.0;
    double fused = 0.0;
};

struct CandidateList {
    std::string query_id;
    double weight = 0.0;
    std::vector<Candidate> entries;  ///< fused descending; ties by raw rgb desc, then view id
};

/// Semantic score of a database view for a query. Implementations must be safe to call
/// concurrently.
using SemanticScorer = std::function<double(const QueryRecord&, const ViewRecord&)>;

/// Pixel-wise scorer; both masks are resized to `width` x `height` first.
SemanticScorer make_pixel_scorer(int width = 80, int height = 64);

/// Embedding scorer. View embeddings for `views` are computed up front; other views are
/// embedded on demand.
SemanticScorer make_embed_scorer(std::shared_ptr<const nn::EmbeddingModel> model,
                                 std::span<const ViewRecord> views, unsigned threads = 0);

/// Affine min-max map to [-1, 1]; a constant list maps to all zeros.
std::vector<double> normalize_scores(std::span<const double> scores);

/// Top-S views by RGB score plus every sibling view of their panoramas.
std::vector<std::string> candidate_pool(const std::string& query_id, const RgbScoreTable& table,
                                        const Dataset& dataset, int top_s = 10);

/// Fuses min-max normalised RGB and semantic scores as rgb + weight * semantic over the pool.
CandidateList fuse(const QueryRecord& query, std::span<const std::string> pool, const RgbScoreTable& table,
                   const Dataset& dataset, const SemanticScorer& scorer, double weight);

using RerankResults = std::map<std::string, CandidateList>;

RerankResults rerank_all(std::span<const QueryRecord> queries, const RgbScoreTable& table,
                         const Dataset& dataset, const SemanticScorer& scorer, double weight, int top_s = 10,
                         unsigned threads = 0);

/// `query_id,rank,view_id,rgb_norm,sem_norm,fused`, rank starting at 1.
void save_results(const RerankResults& results, const std::filesystem::path& path);
RerankResults load_results(const std::filesystem::path& path);

}  // namespace semloc
