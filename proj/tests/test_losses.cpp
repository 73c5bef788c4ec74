// Reconstruction, perceptual, adversarial and temporal losses and their weighted sums.

#include "test_util.hpp"

namespace vcgan {
namespace {

torch::Tensor frames4(uint64_t seed, int64_t size = 4) { return test::random_frames({1, 3, size, size}, seed); }

torch::Tensor ones_mask(int64_t size = 4) { return torch::ones({1, 1, size, size}, torch::kFloat64); }

torch::Tensor flow_of(double dx, double dy, int64_t size = 4) {
    return FlowField::uniform(size, size, dx, dy, torch::kFloat64).data().unsqueeze(0);
}

struct DenseInputs {
    PairTensors flows, masks;
};

DenseInputs dense_inputs(int T, int64_t size = 4, double dx = 0.0) {
    DenseInputs in;
    for (int t = 1; t <= T; ++t) {
        for (int m = 1; m < t; ++m) {
            in.flows[{m, t}] = flow_of(dx * (t - m), 0.0, size);
            in.masks[{m, t}] = ones_mask(size);
        }
    }
    return in;
}

std::vector<torch::Tensor> static_outputs(int T, uint64_t seed = 1) {
    const auto f = frames4(seed);
    return std::vector<torch::Tensor>(static_cast<size_t>(T), f);
}

// ---------------------------------------------------------------------------
// Frame-level terms

TEST(L1Loss, Examples) {
    const auto z = frames4(1);
    EXPECT_EQ(vcgan::l1_loss(z, z).item<double>(), 0.0);
    EXPECT_NEAR(vcgan::l1_loss(z + 0.5, z).item<double>(), 0.5, 1e-12);
    const auto q = torch::full({1, 3, 4, 4}, 0.25, torch::kFloat64);
    EXPECT_NEAR(vcgan::l1_loss(-q, q).item<double>(), 0.5, 1e-12);
    EXPECT_THROW(vcgan::l1_loss(z, frames4(2, 8)), DataError);
}

TEST(PerceptualLoss, IdentityNonNegativityAndShapeErrors) {
    PerceptualNet net;
    const auto a = frames4(3, 8), b = frames4(4, 8);
    EXPECT_EQ(perceptual_loss(a, a, net).item<double>(), 0.0);
    EXPECT_GT(perceptual_loss(a, b, net).item<double>(), 0.0);
    for (uint64_t s = 0; s < 10; ++s) EXPECT_GE(perceptual_loss(frames4(s, 8), frames4(s + 100, 8), net).item<double>(), 0.0);
    EXPECT_THROW(perceptual_loss(a, frames4(5, 4), net), DataError);
    EXPECT_THROW(perceptual_loss(torch::zeros({1, 1, 8, 8}), torch::zeros({1, 1, 8, 8}), net), DataError);
}

TEST(PerceptualLoss, NetIsFrozenAndSeeded) {
    PerceptualNet a, b;
    for (const auto& p : a->parameters()) EXPECT_FALSE(p.requires_grad());
    const auto pa = a->named_parameters();
    for (const auto& item : b->named_parameters()) EXPECT_TRUE(torch::equal(item.value(), pa[item.key()]));
    PerceptualConfig bad;
    bad.feature_layer = 4;
    EXPECT_THROW(PerceptualNet{bad}, UsageError);
}

TEST(PerceptualLoss, GradientMatchesFiniteDifferences) {
    PerceptualConfig cfg;
    cfg.channels = {4, 4};
    cfg.strides = {1, 1};
    cfg.feature_layer = 2;
    PerceptualNet net(cfg);
    net->to(torch::kFloat64);
    auto s = frames4(6).requires_grad_(true);
    const auto z = frames4(7);
    EXPECT_LT(test::gradient_error([&] { return perceptual_loss(s, z, net); }, s), 1e-3);
}

TEST(WganLoss, Examples) {
    const auto fake = torch::full({2, 1, 3, 3}, 0.3, torch::kFloat64);
    const auto real = torch::full({2, 1, 3, 3}, 0.7, torch::kFloat64);
    EXPECT_NEAR(wgan_g_loss(fake).item<double>(), -0.3, 1e-12);
    EXPECT_NEAR(wgan_d_loss(fake, real).item<double>(), -0.4, 1e-12);
    EXPECT_EQ(wgan_d_loss(real, real).item<double>(), 0.0);
    auto bad = fake.clone();
    bad[0][0][0][0] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(wgan_g_loss(bad), DataError);
    EXPECT_THROW(wgan_d_loss(fake, bad), DataError);
    // Unbounded: no sigmoid or clipping.
    EXPECT_NEAR(wgan_g_loss(torch::full({1}, -50.0, torch::kFloat64)).item<double>(), 50.0, 1e-12);
}

// ---------------------------------------------------------------------------
// Short-term

TEST(ShortTermLoss, StaticOutputsAndZeroMasks) {
    const auto outs = static_outputs(4);
    const std::vector<torch::Tensor> flows(3, flow_of(0, 0));
    const std::vector<torch::Tensor> ones(3, ones_mask());
    EXPECT_EQ(short_term_loss(outs, flows, ones).value.item<double>(), 0.0);

    std::vector<torch::Tensor> random_outs{frames4(1), frames4(2), frames4(3), frames4(4)};
    const std::vector<torch::Tensor> zeros(3, torch::zeros({1, 1, 4, 4}, torch::kFloat64));
    EXPECT_EQ(short_term_loss(random_outs, flows, zeros).value.item<double>(), 0.0);
}

TEST(ShortTermLoss, ConstantOffset) {
    const auto s1 = frames4(5) * 0.5;
    const auto flow = flow_of(0.3, -0.6);
    const auto s2 = warp(s1, flow) + 0.2;
    const auto r = short_term_loss({s1, s2}, {flow}, {ones_mask()});
    EXPECT_NEAR(r.value.item<double>(), 0.2, 1e-12);
    ASSERT_EQ(r.pairs.size(), 1u);
    EXPECT_EQ(r.pairs[0], FramePair(1, 2));
}

TEST(ShortTermLoss, DegenerateAndMismatchedInputs) {
    test::WarningCapture capture;
    EXPECT_EQ(short_term_loss({frames4(1)}, {}, {}).value.item<double>(), 0.0);
    EXPECT_NE(capture.text().find("short_term_loss"), std::string::npos);
    EXPECT_THROW(short_term_loss(static_outputs(3), {flow_of(0, 0)}, {ones_mask()}), DataError);
    EXPECT_THROW(short_term_loss(static_outputs(2), {flow_of(0, 0)}, {torch::ones({1, 1, 5, 5})}), DataError);
}

TEST(ShortTermLoss, MaskWeightsEachPixel) {
    const auto s1 = torch::zeros({1, 3, 4, 4}, torch::kFloat64);
    const auto s2 = torch::ones({1, 3, 4, 4}, torch::kFloat64);
    auto half = torch::zeros({1, 1, 4, 4}, torch::kFloat64);
    half.index_put_({0, 0, torch::indexing::Slice(0, 2)}, 1.0);
    EXPECT_NEAR(short_term_loss({s1, s2}, {flow_of(0, 0)}, {half}).value.item<double>(), 0.5, 1e-12);
    EXPECT_NEAR(short_term_loss({s1, s2}, {flow_of(0, 0)}, {half * 0.5}).value.item<double>(), 0.25, 1e-12);
}

// ---------------------------------------------------------------------------
// Long-term

TEST(LongTermLoss, DensePairEnumeration) {
    const auto in = dense_inputs(5);
    const auto r = dense_long_term_loss(static_outputs(5), in.flows, in.masks);
    const std::vector<FramePair> expected{{1, 3}, {1, 4}, {2, 4}, {1, 5}, {2, 5}, {3, 5}};
    EXPECT_EQ(r.pairs, expected);
    EXPECT_EQ(r.value.item<double>(), 0.0);
    const auto in3 = dense_inputs(3);
    EXPECT_EQ(dense_long_term_loss(static_outputs(3), in3.flows, in3.masks).pairs.size(), 1u);
}

TEST(LongTermLoss, DensePairCountLaw) {
    for (int T = 3; T <= 8; ++T) {
        const auto in = dense_inputs(T);
        const auto r = dense_long_term_loss(static_outputs(T), in.flows, in.masks);
        EXPECT_EQ(r.pairs.size(), static_cast<size_t>((T - 1) * (T - 2) / 2)) << "T=" << T;
        std::set<FramePair> unique(r.pairs.begin(), r.pairs.end());
        EXPECT_EQ(unique.size(), r.pairs.size());
        for (const auto& [m, t] : r.pairs) EXPECT_LE(m, t - 2);
    }
}

TEST(LongTermLoss, FirstAnchorPairs) {
    const auto in = dense_inputs(5);
    const auto r = long_term_loss_first_anchor(static_outputs(5), in.flows, in.masks);
    const std::vector<FramePair> expected{{1, 3}, {1, 4}, {1, 5}};
    EXPECT_EQ(r.pairs, expected);
    EXPECT_EQ(r.value.item<double>(), 0.0);

    const std::vector<torch::Tensor> outs{frames4(1), frames4(2), frames4(3)};
    const auto in3 = dense_inputs(3, 4, 0.4);
    EXPECT_EQ(long_term_loss_first_anchor(outs, in3.flows, in3.masks).value.item<double>(),
              dense_long_term_loss(outs, in3.flows, in3.masks).value.item<double>());
}

TEST(LongTermLoss, DegenerateMissingPairAndModeDispatch) {
    test::WarningCapture capture;
    const auto in = dense_inputs(4);
    EXPECT_EQ(dense_long_term_loss(static_outputs(2), in.flows, in.masks).value.item<double>(), 0.0);
    EXPECT_EQ(long_term_loss_first_anchor(static_outputs(2), in.flows, in.masks).value.item<double>(), 0.0);
    EXPECT_NE(capture.text().find("dense_long_term_loss"), std::string::npos);
    auto missing = in;
    missing.flows.erase({2, 4});
    EXPECT_THROW(dense_long_term_loss(static_outputs(4), missing.flows, missing.masks), DataError);
    EXPECT_NO_THROW(long_term_loss_first_anchor(static_outputs(4), missing.flows, missing.masks));

    const std::vector<torch::Tensor> outs{frames4(1), frames4(2), frames4(3), frames4(4)};
    TemporalOptions dense, anchor;
    anchor.long_term_mode = LongTermMode::first_anchor;
    EXPECT_EQ(long_term_loss(outs, in.flows, in.masks, dense).pairs.size(), 3u);
    EXPECT_EQ(long_term_loss(outs, in.flows, in.masks, anchor).pairs.size(), 2u);
    EXPECT_EQ(parse_long_term_mode("first_anchor"), LongTermMode::first_anchor);
    EXPECT_THROW(parse_long_term_mode("sparse"), UsageError);
}

TEST(LongTermLoss, PairNormalizationFlag) {
    const std::vector<torch::Tensor> outs{frames4(1), frames4(2), frames4(3), frames4(4), frames4(5)};
    const auto in = dense_inputs(5, 4, 0.25);
    TemporalOptions per_pair;
    per_pair.normalize_by_pairs = true;
    const double summed = dense_long_term_loss(outs, in.flows, in.masks).value.item<double>();
    const double averaged = dense_long_term_loss(outs, in.flows, in.masks, per_pair).value.item<double>();
    EXPECT_NEAR(averaged, summed / 6.0, 1e-12);
}

// ---------------------------------------------------------------------------
// Properties

TEST(LossProperties, NonNegativeAndPixelPermutationInvariant) {
    const std::vector<torch::Tensor> outs{frames4(1), frames4(2), frames4(3)};
    const auto masks = std::vector<torch::Tensor>{test::random_frames({1, 1, 4, 4}, 9).abs(),
                                                  test::random_frames({1, 1, 4, 4}, 10).abs()};
    const std::vector<torch::Tensor> zero_flows(2, flow_of(0, 0));
    const double st = short_term_loss(outs, zero_flows, masks).value.item<double>();
    EXPECT_GT(st, 0.0);

    // With zero flows the warp is the identity, so a shared pixel permutation
    // applied to outputs and masks must leave the value unchanged.
    const auto perm = torch::randperm(16, torch::TensorOptions().dtype(torch::kLong));
    auto permute = [&](const torch::Tensor& t) {
        return t.flatten(2).index_select(2, perm).view(t.sizes());
    };
    std::vector<torch::Tensor> p_outs, p_masks;
    for (const auto& o : outs) p_outs.push_back(permute(o));
    for (const auto& m : masks) p_masks.push_back(permute(m));
    EXPECT_NEAR(short_term_loss(p_outs, zero_flows, p_masks).value.item<double>(), st, 1e-12);
    EXPECT_NEAR(vcgan::l1_loss(permute(outs[0]), permute(outs[1])).item<double>(),
                vcgan::l1_loss(outs[0], outs[1]).item<double>(), 1e-12);
}

TEST(LossProperties, TemporalGradientsMatchFiniteDifferences) {
    const int T = 4;
    std::vector<torch::Tensor> outs;
    for (int t = 0; t < T; ++t) outs.push_back(frames4(40 + static_cast<uint64_t>(t)).requires_grad_(true));
    std::vector<torch::Tensor> flows, masks;
    for (int k = 0; k < T - 1; ++k) {
        flows.push_back(flow_of(0.37, -0.21));
        masks.push_back(test::random_frames({1, 1, 4, 4}, 60 + static_cast<uint64_t>(k)).abs());
    }
    auto in = dense_inputs(T, 4, 0.29);
    for (auto& [pair, m] : in.masks) m = test::random_frames({1, 1, 4, 4}, 70 + static_cast<uint64_t>(pair.first * 10 + pair.second)).abs();
    const auto target = frames4(50);
    for (int t = 0; t < T; ++t) {
        auto& x = outs[static_cast<size_t>(t)];
        EXPECT_LT(test::gradient_error([&] { return short_term_loss(outs, flows, masks).value; }, x), 1e-3) << t;
        EXPECT_LT(test::gradient_error([&] { return dense_long_term_loss(outs, in.flows, in.masks).value; }, x), 1e-3) << t;
        EXPECT_LT(test::gradient_error([&] { return long_term_loss_first_anchor(outs, in.flows, in.masks).value; }, x), 1e-3) << t;
        EXPECT_LT(test::gradient_error([&] { return vcgan::l1_loss(x, target); }, x), 1e-3) << t;
    }
}

// ---------------------------------------------------------------------------
// Weighted objectives

TEST(Objectives, Stage1Examples) {
    PerceptualNet net;
    const auto s = frames4(1, 8), z = frames4(2, 8);
    LossWeights defaults;
    const auto r = stage1_objective(s, z, defaults, net);
    EXPECT_NEAR(r.total.item<double>(), 10 * r.terms.l1.item<double>() + 5 * r.terms.perceptual.item<double>(), 1e-12);
    EXPECT_EQ(weighted_total({1, 1, 0, 0, 0}, defaults), 15.0);
    LossWeights zero{0, 0, 0, 0, 0};
    EXPECT_EQ(stage1_objective(s, z, zero, net).total.item<double>(), 0.0);
    LossWeights l1_only;
    l1_only.perceptual = 0;
    EXPECT_NEAR(stage1_objective(s, z, l1_only, net).total.item<double>(), 10 * vcgan::l1_loss(s, z).item<double>(), 1e-12);
    LossWeights negative;
    negative.l1 = -1;
    EXPECT_THROW(stage1_objective(s, z, negative, net), UsageError);
}

TEST(Objectives, Stage2Examples) {
    LossWeights defaults;
    EXPECT_EQ(weighted_total({1, 1, 1, 1, 1}, defaults), 24.0);
    LossTerms terms;
    terms.l1 = torch::tensor(0.7, torch::kFloat64);
    terms.perceptual = torch::tensor(1.3, torch::kFloat64);
    terms.gan = torch::tensor(-0.4, torch::kFloat64);
    terms.short_term = torch::tensor(0.11, torch::kFloat64);
    terms.long_term = torch::tensor(0.29, torch::kFloat64);
    const auto r = stage2_objective(terms, defaults);
    const double expected = ((((10 * 0.7) + 5 * 1.3) + 1 * -0.4) + 3 * 0.11) + 5 * 0.29;
    EXPECT_EQ(r.total.item<double>(), expected);
    EXPECT_EQ(r.values().at("gan"), -0.4);

    // l(4.3): without both temporal terms.
    LossWeights no_temporal = defaults;
    no_temporal.short_term = 0;
    no_temporal.long_term = 0;
    EXPECT_NEAR(stage2_objective(terms, no_temporal).total.item<double>(), 7 + 6.5 - 0.4, 1e-12);
    LossWeights negative;
    negative.long_term = -0.1;
    EXPECT_THROW(stage2_objective(terms, negative), UsageError);
}

}  // namespace
}  // namespace vcgan
