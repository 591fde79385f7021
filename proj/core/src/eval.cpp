#include "gaitma/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>

#include "gaitma/errors.hpp"

namespace gaitma {

using nlohmann::json;

namespace {

void check_dist_inputs(const Tensor& dist, const std::vector<int>& probe_labels,
                       const std::vector<int>& gallery_labels, const std::vector<int>& probe_ids,
                       const std::vector<int>& gallery_ids) {
    if (dist.rank() != 2) throw InvalidArgument("retrieval metrics: distance matrix must be rank 2");
    const std::size_t n = static_cast<std::size_t>(dist.dim(0));
    const std::size_t m = static_cast<std::size_t>(dist.dim(1));
    if (probe_labels.size() != n || probe_ids.size() != n)
        throw InvalidArgument("retrieval metrics: probe annotation length mismatch");
    if (gallery_labels.size() != m || gallery_ids.size() != m)
        throw InvalidArgument("retrieval metrics: gallery annotation length mismatch");
}

/// Gallery order for one probe: ascending distance, ties by gallery index,
/// same-sample-id entries dropped.
std::vector<int> ranked_gallery(const Tensor& dist, int probe, const std::vector<int>& gallery_ids,
                                int probe_id) {
    const int m = dist.dim(1);
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j)
        if (gallery_ids[static_cast<std::size_t>(j)] != probe_id) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        double da = dist.at(probe, a), db = dist.at(probe, b);
        if (da != db) return da < db;
        return a < b;
    });
    return order;
}

}  // namespace

Tensor pairwise_distances(const Tensor& probes, const Tensor& gallery) {
    if (probes.rank() != 2 || gallery.rank() != 2)
        throw InvalidArgument("pairwise_distances: expected rank-2 inputs");
    if (probes.dim(1) != gallery.dim(1))
        throw InvalidArgument("pairwise_distances: embedding widths differ");
    const int n = probes.dim(0), m = gallery.dim(0), d = probes.dim(1);
    Tensor out({n, m});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                double diff = probes.at(i, k) - gallery.at(j, k);
                s += diff * diff;
            }
            out.at(i, j) = std::sqrt(s);
        }
    return out;
}

double rank_k(const Tensor& dist, const std::vector<int>& probe_labels, const std::vector<int>& gallery_labels,
              const std::vector<int>& probe_ids, const std::vector<int>& gallery_ids, int k) {
    check_dist_inputs(dist, probe_labels, gallery_labels, probe_ids, gallery_ids);
    if (k < 1 || k > dist.dim(1)) throw InvalidArgument("rank_k: k outside [1, gallery size]");
    const int n = dist.dim(0);
    if (n == 0) throw InvalidArgument("rank_k: no probes");
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        auto order = ranked_gallery(dist, i, gallery_ids, probe_ids[static_cast<std::size_t>(i)]);
        if (order.empty()) throw InvalidArgument("rank_k: gallery empty after same-id exclusion");
        const int limit = std::min<int>(k, static_cast<int>(order.size()));
        for (int r = 0; r < limit; ++r)
            if (gallery_labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] ==
                probe_labels[static_cast<std::size_t>(i)]) {
                ++hits;
                break;
            }
    }
    return static_cast<double>(hits) / n;
}

MeanResult mean_ap(const Tensor& dist, const std::vector<int>& probe_labels,
                   const std::vector<int>& gallery_labels, const std::vector<int>& probe_ids,
                   const std::vector<int>& gallery_ids) {
    check_dist_inputs(dist, probe_labels, gallery_labels, probe_ids, gallery_ids);
    const int n = dist.dim(0);
    double sum = 0.0;
    int used = 0, excluded = 0;
    for (int i = 0; i < n; ++i) {
        auto order = ranked_gallery(dist, i, gallery_ids, probe_ids[static_cast<std::size_t>(i)]);
        int matches = 0;
        double ap = 0.0;
        for (std::size_t r = 0; r < order.size(); ++r)
            if (gallery_labels[static_cast<std::size_t>(order[r])] == probe_labels[static_cast<std::size_t>(i)]) {
                ++matches;
                ap += static_cast<double>(matches) / static_cast<double>(r + 1);
            }
        if (matches == 0) {
            ++excluded;
            continue;
        }
        sum += ap / matches;
        ++used;
    }
    if (used == 0) throw InvalidArgument("mean_ap: every probe had zero matches");
    return {sum / used, excluded};
}

MeanResult mean_inp(const Tensor& dist, const std::vector<int>& probe_labels,
                    const std::vector<int>& gallery_labels, const std::vector<int>& probe_ids,
                    const std::vector<int>& gallery_ids) {
    check_dist_inputs(dist, probe_labels, gallery_labels, probe_ids, gallery_ids);
    const int n = dist.dim(0);
    double sum = 0.0;
    int used = 0, excluded = 0;
    for (int i = 0; i < n; ++i) {
        auto order = ranked_gallery(dist, i, gallery_ids, probe_ids[static_cast<std::size_t>(i)]);
        int matches = 0;
        std::size_t hardest = 0;  // 1-based rank of the last match
        for (std::size_t r = 0; r < order.size(); ++r)
            if (gallery_labels[static_cast<std::size_t>(order[r])] == probe_labels[static_cast<std::size_t>(i)]) {
                ++matches;
                hardest = r + 1;
            }
        if (matches == 0) {
            ++excluded;
            continue;
        }
        sum += static_cast<double>(matches) / static_cast<double>(hardest);
        ++used;
    }
    if (used == 0) throw InvalidArgument("mean_inp: every probe had zero matches");
    return {sum / used, excluded};
}

EvalReport evaluate_embeddings(const std::vector<EmbeddingRecord>& gallery,
                               const std::vector<EmbeddingRecord>& probes) {
    if (gallery.empty() || probes.empty()) throw InvalidArgument("evaluate_embeddings: empty gallery or probes");
    const int d = static_cast<int>(gallery.front().embedding.size());
    auto pack = [&](const std::vector<EmbeddingRecord>& recs) {
        Tensor t({static_cast<int>(recs.size()), d});
        for (std::size_t i = 0; i < recs.size(); ++i) {
            if (static_cast<int>(recs[i].embedding.size()) != d)
                throw InvalidArgument("evaluate_embeddings: inconsistent embedding widths");
            for (int j = 0; j < d; ++j) {
                double v = recs[i].embedding[static_cast<std::size_t>(j)];
                if (!std::isfinite(v)) throw InvalidArgument("evaluate_embeddings: non-finite embedding");
                t.at(static_cast<int>(i), j) = v;
            }
        }
        return t;
    };
    auto labels_of = [](const std::vector<EmbeddingRecord>& recs) {
        std::vector<int> out;
        out.reserve(recs.size());
        for (const auto& r : recs) out.push_back(r.label);
        return out;
    };
    auto ids_of = [](const std::vector<EmbeddingRecord>& recs) {
        std::vector<int> out;
        out.reserve(recs.size());
        for (const auto& r : recs) out.push_back(r.id);
        return out;
    };

    Tensor dist = pairwise_distances(pack(probes), pack(gallery));
    auto pl = labels_of(probes), gl = labels_of(gallery);
    auto pi = ids_of(probes), gi = ids_of(gallery);

    EvalReport rep;
    rep.probe_count = static_cast<int>(probes.size());
    rep.gallery_count = static_cast<int>(gallery.size());
    rep.rank1 = rank_k(dist, pl, gl, pi, gi, 1);
    rep.rank5 = rank_k(dist, pl, gl, pi, gi, std::min(5, rep.gallery_count));
    MeanResult ap = mean_ap(dist, pl, gl, pi, gi);
    MeanResult inp = mean_inp(dist, pl, gl, pi, gi);
    rep.map = ap.value;
    rep.minp = inp.value;
    rep.zero_match_excluded = ap.excluded;
    return rep;
}

EvalSplit first_sequence_split(const DatasetIndex& idx) {
    EvalSplit split;
    for (int i = 0; i < idx.identities; ++i) {
        const auto& seqs = idx.by_identity[static_cast<std::size_t>(i)];
        int best = seqs.front();
        for (int s : seqs)
            if (idx.sequences[static_cast<std::size_t>(s)].sequence <
                idx.sequences[static_cast<std::size_t>(best)].sequence)
                best = s;
        split.gallery.push_back(best);
        for (int s : seqs)
            if (s != best) split.probes.push_back(s);
    }
    if (split.probes.empty()) throw InvalidArgument("first_sequence_split: no probe sequences remain");
    return split;
}

std::vector<EmbeddingRecord> embed_sequences(GaitMAModel& model, const RunConfig& cfg, const DatasetIndex& idx,
                                             const std::vector<int>& sequence_indices) {
    std::vector<EmbeddingRecord> out;
    out.reserve(sequence_indices.size());
    for (int s : sequence_indices) {
        RawSequence raw = load_sequence(idx, s);
        std::vector<int> all_frames(raw.poses.size());
        std::iota(all_frames.begin(), all_frames.end(), 0);
        auto sample = assemble_sample(raw, all_frames, idx.topology, cfg.heatmap_sigma,
                                      cfg.model.backbone.sil_height, cfg.model.backbone.sil_width,
                                      cfg.model.backbone.ske_height, cfg.model.backbone.ske_width);
        Tensor emb = model.embed(sample);
        EmbeddingRecord rec;
        rec.id = s;
        rec.label = idx.sequences[static_cast<std::size_t>(s)].identity;
        rec.embedding.assign(emb.data(), emb.data() + emb.size());
        out.push_back(std::move(rec));
    }
    return out;
}

std::string report_to_json(const EvalReport& rep) {
    json j = {{"rank1", rep.rank1},
              {"rank5", rep.rank5},
              {"mAP", rep.map},
              {"mINP", rep.minp},
              {"probes", rep.probe_count},
              {"gallery", rep.gallery_count},
              {"zero_match_excluded", rep.zero_match_excluded}};
    return j.dump(2) + "\n";
}

void write_embeddings_jsonl(const std::vector<EmbeddingRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const EmbeddingRecord& r : records) {
        json j = {{"id", r.id}, {"label", r.label}, {"embedding", r.embedding}};
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("short write to " + path);
}

}  // namespace gaitma
