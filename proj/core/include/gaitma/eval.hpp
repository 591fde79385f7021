#pragma once

#include <string>
#include <vector>

#include "gaitma/config.hpp"
#include "gaitma/dataset.hpp"
#include "gaitma/model.hpp"
#include "gaitma/tensor.hpp"

namespace gaitma {

struct EmbeddingRecord {
    int id = 0;     // unique sample identifier
    int label = 0;  // identity
    std::vector<double> embedding;
};

/// Euclidean distances, result N×M for N probe rows and M gallery rows.
Tensor pairwise_distances(const Tensor& probes, const Tensor& gallery);

/// Fraction of probes whose k nearest gallery entries (ascending distance,
/// ties broken by lower gallery index) contain a matching label. Gallery
/// entries sharing the probe's sample id are excluded from its ranking.
double rank_k(const Tensor& dist, const std::vector<int>& probe_labels, const std::vector<int>& gallery_labels,
              const std::vector<int>& probe_ids, const std::vector<int>& gallery_ids, int k);

struct MeanResult {
    double value = 0.0;
    int excluded = 0;  // probes with zero gallery matches, left out with a warning count
};

/// Mean average precision over the ranked list of each probe.
MeanResult mean_ap(const Tensor& dist, const std::vector<int>& probe_labels,
                   const std::vector<int>& gallery_labels, const std::vector<int>& probe_ids,
                   const std::vector<int>& gallery_ids);

/// Mean inverse negative penalty: per probe, (match count) / (rank of the
/// hardest match).
MeanResult mean_inp(const Tensor& dist, const std::vector<int>& probe_labels,
                    const std::vector<int>& gallery_labels, const std::vector<int>& probe_ids,
                    const std::vector<int>& gallery_ids);

struct EvalReport {
    double rank1 = 0.0;
    double rank5 = 0.0;
    double map = 0.0;
    double minp = 0.0;
    int probe_count = 0;
    int gallery_count = 0;
    int zero_match_excluded = 0;
};

/// All four retrieval metrics for one gallery/probe split. rank5 uses
/// k = min(5, gallery size).
EvalReport evaluate_embeddings(const std::vector<EmbeddingRecord>& gallery,
                               const std::vector<EmbeddingRecord>& probes);

/// Split for the synthetic protocol: per identity, the sequence with the
/// lowest sequence number goes to the gallery, the rest become probes.
/// Returned values are indices into `idx.sequences`.
struct EvalSplit {
    std::vector<int> gallery;
    std::vector<int> probes;
};
EvalSplit first_sequence_split(const DatasetIndex& idx);

/// Whole-sequence embedding (all frames, no sampling) for every listed
/// sequence; record ids are the sequence indices, labels the identities.
std::vector<EmbeddingRecord> embed_sequences(GaitMAModel& model, const RunConfig& cfg, const DatasetIndex& idx,
                                             const std::vector<int>& sequence_indices);

std::string report_to_json(const EvalReport& report);
void write_embeddings_jsonl(const std::vector<EmbeddingRecord>& records, const std::string& path);

}  // namespace gaitma
