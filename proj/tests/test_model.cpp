#include <cmath>
#include <vector>

#include <doctest.h>

#include "gaitma/model.hpp"
#include "gaitma/random.hpp"
#include "test_util.hpp"

using namespace gaitma;
using testutil::max_diff;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.backbone.sil_stages = {3, 4};
    cfg.backbone.ske_stages = {3, 4};
    cfg.backbone.part_count = 2;
    cfg.backbone.embed_dim = 6;
    cfg.backbone.sil_height = 16;
    cfg.backbone.sil_width = 12;
    cfg.backbone.ske_height = 16;
    cfg.backbone.ske_width = 12;
    cfg.skeleton_channels = 5;
    cfg.cam_reduction = 4;
    cfg.num_classes = 3;
    return cfg;
}

GaitMAModel::SampleInput random_sample(Rng& rng, int frames = 2, int channels = 5, int h = 16, int w = 12) {
    GaitMAModel::SampleInput s;
    s.silhouette = testutil::rand_tensor({1, frames, h, w}, rng, 0.0, 1.0);
    s.heatmaps = testutil::rand_tensor({channels, frames, h, w}, rng, 0.0, 1.0);
    return s;
}

}  // namespace

TEST_CASE("embedding width depends on the fusion path") {
    ModelConfig cfg = small_config();
    CHECK(cfg.embedding_width() == 12);  // concatenated modalities
    cfg.mlm = false;
    CHECK(cfg.embedding_width() == 12);  // gate alone still concatenates
    cfg.cam = false;
    CHECK(cfg.embedding_width() == 6);  // additive fallback
    cfg.skeleton_branch = false;
    CHECK(cfg.embedding_width() == 6);
}

TEST_CASE("forward produces one flattened row per sample with part logits") {
    GaitMAModel model(small_config(), 7);
    Rng rng(81);
    std::vector<GaitMAModel::SampleInput> batch = {random_sample(rng), random_sample(rng), random_sample(rng)};

    Tape tape;
    auto fwd = model.forward(tape, batch);
    CHECK(fwd.embeddings.dims() == std::vector<int>{3, 2 * 12});
    CHECK(fwd.has_modalities);
    CHECK(fwd.modality1.dims() == std::vector<int>{3, 2 * 6});
    CHECK(fwd.modality2.dims() == std::vector<int>{3, 2 * 6});
    REQUIRE(fwd.part_logits.size() == 2);
    CHECK(fwd.part_logits[0].dims() == std::vector<int>{3, 3});
}

TEST_CASE("each batch row equals the single-sample embedding") {
    GaitMAModel model(small_config(), 7);
    Rng rng(82);
    std::vector<GaitMAModel::SampleInput> batch = {random_sample(rng), random_sample(rng)};

    Tape tape;
    auto fwd = model.forward(tape, batch);
    for (int i = 0; i < 2; ++i) {
        Tensor solo = model.embed(batch[static_cast<std::size_t>(i)]);
        REQUIRE(solo.size() == fwd.embeddings.dims()[1]);
        for (std::int64_t j = 0; j < solo.size(); ++j)
            CHECK(fwd.embeddings.value().at(static_cast<int>(i), static_cast<int>(j)) == solo[j]);
    }
}

TEST_CASE("batch order only permutes the embedding rows") {
    GaitMAModel model(small_config(), 9);
    Rng rng(83);
    auto a = random_sample(rng);
    auto b = random_sample(rng);
    auto c = random_sample(rng);

    Tape t1, t2;
    auto fwd = model.forward(t1, {a, b, c});
    auto rev = model.forward(t2, {c, a, b});
    const int w = fwd.embeddings.dims()[1];
    for (int j = 0; j < w; ++j) {
        CHECK(fwd.embeddings.value().at(0, j) == rev.embeddings.value().at(1, j));
        CHECK(fwd.embeddings.value().at(1, j) == rev.embeddings.value().at(2, j));
        CHECK(fwd.embeddings.value().at(2, j) == rev.embeddings.value().at(0, j));
    }
}

TEST_CASE("disabled skeleton branch ignores the heatmap input") {
    ModelConfig cfg = small_config();
    cfg.skeleton_branch = false;
    cfg.num_classes = 0;
    GaitMAModel model(cfg, 11);
    Rng rng(84);
    auto s1 = random_sample(rng);
    auto s2 = s1;
    s2.heatmaps.fill(0.0);
    CHECK(max_diff(model.embed(s1), model.embed(s2)) == 0.0);
    CHECK(model.embed(s1).size() == 2 * 6);
    CHECK(model.params().find("ske.stage0.conv1.weight") == nullptr);
    CHECK(model.params().find("cam.w1") == nullptr);
}

TEST_CASE("additive fusion keeps the single-modality width") {
    ModelConfig cfg = small_config();
    cfg.cam = false;
    cfg.mlm = false;
    cfg.num_classes = 0;
    GaitMAModel model(cfg, 13);
    Rng rng(85);
    CHECK(model.embed(random_sample(rng)).size() == 2 * 6);
    CHECK(model.params().find("cam.w1") == nullptr);
    CHECK(model.params().find("mlm.ln1.gain") == nullptr);
}

TEST_CASE("same seed reproduces the initialization bit for bit") {
    GaitMAModel a(small_config(), 1234);
    GaitMAModel b(small_config(), 1234);
    GaitMAModel c(small_config(), 1235);
    REQUIRE(a.params().count() == b.params().count());
    double delta = 0.0;
    bool differs = false;
    std::size_t i = 0;
    for (auto& p : a.params().all()) {
        const Parameter* q = b.params().find(p->name);
        REQUIRE(q != nullptr);
        delta = std::max(delta, max_diff(p->value, q->value));
        const Parameter* r = c.params().find(p->name);
        if (r != nullptr && max_diff(p->value, r->value) > 0.0) differs = true;
        ++i;
    }
    CHECK(delta == 0.0);
    CHECK(differs);
}

TEST_CASE("loss total combines the weighted terms from the breakdown") {
    GaitMAModel model(small_config(), 17);
    Rng rng(86);
    std::vector<GaitMAModel::SampleInput> batch = {random_sample(rng), random_sample(rng), random_sample(rng),
                                                   random_sample(rng)};
    std::vector<int> labels = {0, 0, 1, 1};
    LossWeights w;
    w.alpha1 = 1.0;
    w.alpha2 = 0.1;
    w.alpha3 = 0.1;

    Tape tape;
    auto lb = model.compute_loss(tape, batch, labels, w, 0.2, true, true);
    double expect = w.alpha1 * lb.triplet + w.alpha2 * lb.cross_entropy + w.alpha3 * lb.wasserstein;
    CHECK(std::abs(lb.total.scalar() - expect) <= 1e-12);
    CHECK(lb.cross_entropy > 0.0);
    CHECK(lb.wasserstein > 0.0);
    CHECK(lb.triplet_stats.valid > 0);
    CHECK_FALSE(lb.triplet_stats.degenerate);
}

TEST_CASE("distribution term drops out when disabled") {
    GaitMAModel model(small_config(), 19);
    Rng rng(87);
    std::vector<GaitMAModel::SampleInput> batch = {random_sample(rng), random_sample(rng)};
    std::vector<int> labels = {0, 1};
    LossWeights w;

    Tape tape;
    auto lb = model.compute_loss(tape, batch, labels, w, 0.2, false, false);
    CHECK(lb.wasserstein == 0.0);
}

TEST_CASE("input shape violations are rejected with context") {
    GaitMAModel model(small_config(), 21);
    Rng rng(88);
    auto bad = random_sample(rng);
    bad.silhouette = Tensor({1, 2, 8, 12});  // wrong height
    Tape tape;
    CHECK_THROWS_AS(model.forward(tape, {bad}), InvalidArgument);

    auto bad2 = random_sample(rng);
    bad2.heatmaps = Tensor({4, 2, 16, 12});  // wrong channel count
    CHECK_THROWS_AS(model.forward(tape, {bad2}), InvalidArgument);

    CHECK_THROWS_AS(model.forward(tape, {}), InvalidArgument);
    CHECK_THROWS_AS(model.compute_loss(tape, {random_sample(rng)}, {0, 1}, LossWeights{}, 0.2, true, false),
                    InvalidArgument);
}

TEST_CASE("classifier labels must fit the head") {
    GaitMAModel model(small_config(), 23);
    Rng rng(89);
    std::vector<GaitMAModel::SampleInput> batch = {random_sample(rng), random_sample(rng)};
    Tape tape;
    CHECK_THROWS_AS(model.compute_loss(tape, batch, {0, 3}, LossWeights{}, 0.2, true, false), InvalidArgument);
}
