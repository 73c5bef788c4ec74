// Frames, color conversion, .flo and PNG I/O, warping, masks, synthetic clips.

#include "test_util.hpp"

namespace vcgan {
namespace {

using test::TempDir;

Frame rgb_const(double r, double g, double b, int64_t h = 2, int64_t w = 2) {
    auto t = torch::empty({3, h, w}, torch::kFloat64);
    t[0].fill_(r);
    t[1].fill_(g);
    t[2].fill_(b);
    return Frame(t, ColorSpace::rgb);
}

// ---------------------------------------------------------------------------
// core_data

TEST(CoreData, FrameRejectsOutOfRangeAndBadChannels) {
    EXPECT_THROW(Frame(torch::full({3, 2, 2}, 1.5), ColorSpace::rgb), DataError);
    EXPECT_THROW(Frame(torch::zeros({3, 2, 2}), ColorSpace::grayscale), DataError);
    EXPECT_THROW(Frame(torch::zeros({1, 2, 2}), ColorSpace::rgb), DataError);
    EXPECT_THROW(Frame(torch::full({1, 2, 2}, std::nan("")), ColorSpace::grayscale), DataError);
    EXPECT_NO_THROW(Frame(torch::full({1, 2, 2}, -1.0), ColorSpace::grayscale));
}

TEST(CoreData, VideoClipRequiresConsistentFrames) {
    EXPECT_THROW(VideoClip({}), DataError);
    std::vector<Frame> mixed{rgb_const(0, 0, 0), rgb_const(0, 0, 0, 4, 4)};
    EXPECT_THROW(VideoClip(std::move(mixed)), DataError);
    VideoClip clip({rgb_const(0, 0, 0), rgb_const(1, 1, 1)});
    EXPECT_EQ(clip.length(), 2u);
    EXPECT_EQ(clip.stacked().sizes(), (std::vector<int64_t>{2, 3, 2, 2}));
}

TEST(CoreData, GrayscaleEndpoints) {
    EXPECT_TRUE(torch::equal(to_grayscale(rgb_const(1, 1, 1)).data(), torch::ones({1, 2, 2}, torch::kFloat64)));
    EXPECT_TRUE(torch::equal(to_grayscale(rgb_const(-1, -1, -1)).data(), -torch::ones({1, 2, 2}, torch::kFloat64)));
}

TEST(CoreData, GrayscaleOfPureRed) {
    // (1,0,0) in [0,1] scale is (1,-1,-1) in [-1,1] scale; luma 0.299 -> -0.402.
    const auto g = to_grayscale(rgb_const(1, -1, -1));
    EXPECT_NEAR(g.data()[0][0][0].item<double>(), -0.402, 1e-12);
}

TEST(CoreData, GrayscaleRejectsGrayscaleInput) {
    EXPECT_THROW(to_grayscale(Frame(torch::zeros({1, 2, 2}), ColorSpace::grayscale)), DataError);
}

TEST(CoreData, GrayscaleIsAffine) {
    const auto f1 = test::random_frames({3, 4, 4}, 1);
    const auto f2 = test::random_frames({3, 4, 4}, 2);
    const double a = 0.3, b = 0.7;
    const auto lhs = to_grayscale(Frame(a * f1 + b * f2, ColorSpace::rgb)).data();
    const auto rhs = a * to_grayscale(Frame(f1, ColorSpace::rgb)).data() + b * to_grayscale(Frame(f2, ColorSpace::rgb)).data();
    EXPECT_LT((lhs - rhs).abs().max().item<double>(), 1e-12);
}

TEST(CoreData, ReplicateThenGrayIsExactIdentity) {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const Frame g(test::random_frames({1, 5, 7}, seed, torch::kFloat32), ColorSpace::grayscale);
        const auto rep = replicate_channels(g);
        EXPECT_EQ(rep.channels(), 3);
        EXPECT_TRUE(torch::equal(rep.data()[0], rep.data()[2]));
        EXPECT_TRUE(torch::equal(to_grayscale(rep).data(), g.data()));
    }
    const Frame half(torch::full({1, 3, 3}, 0.5), ColorSpace::grayscale);
    EXPECT_TRUE(torch::equal(replicate_channels(half).data(), torch::full({3, 3, 3}, 0.5)));
    EXPECT_THROW(replicate_channels(rgb_const(0, 0, 0)), DataError);
}

TEST(CoreData, NormalizeEndpointsAndRange) {
    const auto raw = torch::tensor({0, 127, 255}, torch::kUInt8).view({1, 1, 3});
    const auto f = normalize(raw).data();
    EXPECT_EQ(f[0][0][0].item<double>(), -1.0);
    EXPECT_NEAR(f[0][0][1].item<double>(), 127.0 / 127.5 - 1.0, 1e-7);
    EXPECT_EQ(f[0][0][2].item<double>(), 1.0);
    EXPECT_THROW(normalize(torch::tensor({256}, torch::kInt32).view({1, 1, 1})), DataError);
    EXPECT_THROW(normalize(torch::tensor({-1}, torch::kInt32).view({1, 1, 1})), DataError);
}

TEST(CoreData, DenormalizeRoundTripWithinQuantization) {
    const Frame f(test::random_frames({3, 6, 6}, 9), ColorSpace::rgb);
    const auto back = normalize(denormalize(f));
    EXPECT_LE((back.data().to(torch::kFloat64) - f.data()).abs().max().item<double>(), 1.0 / 255.0 + 1e-9);
    const auto raw = torch::arange(256, torch::kInt32).view({1, 16, 16});
    EXPECT_TRUE(torch::equal(denormalize(normalize(raw)).to(torch::kInt32), raw));
}

TEST(CoreData, FlowAndMaskInvariants) {
    EXPECT_THROW(FlowField(torch::zeros({1, 2, 2})), DataError);
    auto bad = torch::zeros({2, 2, 2});
    bad[0][0][0] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(FlowField{bad}, DataError);
    EXPECT_THROW(OcclusionMask(torch::full({1, 2, 2}, 1.1)), DataError);
    EXPECT_THROW(OcclusionMask(torch::full({1, 2, 2}, -0.1)), DataError);
    const auto u = FlowField::uniform(2, 3, 1.5, -2.0);
    EXPECT_EQ(u.data()[0][1][2].item<double>(), 1.5);
    EXPECT_EQ(u.data()[1][0][0].item<double>(), -2.0);
}

// ---------------------------------------------------------------------------
// .flo and PNG I/O

TEST(FloIo, HeaderLayoutAndBitExactRoundTrip) {
    auto data = torch::randn({2, 3, 5}, torch::kFloat32) * 7;
    data[0][0][0] = -0.0f;
    data[1][2][4] = 1e-30f;
    const FlowField flow(data);
    const auto bytes = io::encode_flo(flow);
    ASSERT_EQ(bytes.size(), 12u + 3 * 5 * 8);
    float magic;
    int32_t w, h;
    std::memcpy(&magic, bytes.data(), 4);
    std::memcpy(&w, bytes.data() + 4, 4);
    std::memcpy(&h, bytes.data() + 8, 4);
    EXPECT_EQ(magic, 202021.25f);
    EXPECT_EQ(w, 5);
    EXPECT_EQ(h, 3);
    float u01;  // interleaved (u, v) at row 0, column 1
    std::memcpy(&u01, bytes.data() + 12 + 8, 4);
    EXPECT_EQ(u01, data[0][0][1].item<float>());

    TempDir dir("flo");
    io::write_flo(dir.path() / "a.flo", flow);
    const auto back = io::read_flo(dir.path() / "a.flo");
    EXPECT_EQ(std::memcmp(back.data().data_ptr(), data.data_ptr(), data.nbytes()), 0);
}

TEST(FloIo, RejectsCorruptFiles) {
    auto bytes = io::encode_flo(FlowField::zeros(2, 2));
    auto bad_magic = bytes;
    bad_magic[0] ^= 0x5A;
    EXPECT_THROW(io::decode_flo(bad_magic), DataError);
    bytes.pop_back();
    EXPECT_THROW(io::decode_flo(bytes), DataError);
    EXPECT_THROW(io::read_flo("/nonexistent/x.flo"), DataError);
    EXPECT_EQ(io::flow_filename("d/frame_00001.png", "d/frame_00002.png"), "frame_00001_frame_00002.flo");
}

TEST(ImageIo, PngRoundTripWithinQuantization) {
    TempDir dir("png");
    const Frame rgb(test::random_frames({3, 5, 4}, 3, torch::kFloat32), ColorSpace::rgb);
    const Frame gray(test::random_frames({1, 5, 4}, 4, torch::kFloat32), ColorSpace::grayscale);
    io::write_png(dir.path() / "c.png", rgb);
    io::write_png(dir.path() / "g.png", gray);
    const auto rgb_back = io::read_png(dir.path() / "c.png");
    const auto gray_back = io::read_png(dir.path() / "g.png");
    EXPECT_EQ(rgb_back.color_space(), ColorSpace::rgb);
    EXPECT_EQ(gray_back.color_space(), ColorSpace::grayscale);
    EXPECT_LE((rgb_back.data() - rgb.data()).abs().max().item<double>(), 1.0 / 255.0 + 1e-6);
    EXPECT_LE((gray_back.data() - gray.data()).abs().max().item<double>(), 1.0 / 255.0 + 1e-6);
    // Channel order survives (red stays red).
    io::write_png(dir.path() / "r.png", rgb_const(1, -1, -1));
    const auto red = io::read_png(dir.path() / "r.png").data();
    EXPECT_EQ(red[0][0][0].item<float>(), 1.0f);
    EXPECT_EQ(red[2][0][0].item<float>(), -1.0f);
}

TEST(ImageIo, DirectoryOrderAndMissingDirs) {
    TempDir dir("dir");
    const Frame f(torch::zeros({1, 2, 2}), ColorSpace::grayscale);
    for (const char* n : {"b.png", "a.png", "c.png"}) io::write_png(dir.path() / n, f);
    const auto files = io::list_pngs(dir.path());
    ASSERT_EQ(files.size(), 3u);
    EXPECT_EQ(files[0].filename(), "a.png");
    EXPECT_EQ(files[2].filename(), "c.png");
    EXPECT_THROW(io::read_frame_dir(dir.path() / "missing"), DataError);
    EXPECT_THROW(io::read_png(dir.path() / "missing.png"), DataError);
}

// ---------------------------------------------------------------------------
// Warping

TEST(Warp, ZeroFlowIsBitExactIdentity) {
    const auto img = test::random_frames({2, 3, 5, 6}, 5, torch::kFloat32);
    const auto out = warp(img, torch::zeros({2, 2, 5, 6}));
    EXPECT_TRUE(torch::equal(out, img));
}

TEST(Warp, IntegerShiftClampsAtBorder) {
    const auto row = torch::tensor({1.0, 2.0, 3.0, 4.0}).view({1, 1, 4});
    const auto out = warp(row, FlowField::uniform(1, 4, 1.0, 0.0, torch::kFloat64).data());
    EXPECT_TRUE(torch::equal(out.view({4}), torch::tensor({2.0, 3.0, 4.0, 4.0})));
    const auto left = warp(row, FlowField::uniform(1, 4, -2.0, 0.0, torch::kFloat64).data());
    EXPECT_TRUE(torch::equal(left.view({4}), torch::tensor({1.0, 1.0, 1.0, 2.0})));
}

TEST(Warp, HalfPixelBilinear) {
    const auto row = torch::tensor({0.0, 1.0}).view({1, 1, 2});
    const auto out = warp(row, FlowField::uniform(1, 2, 0.5, 0.0, torch::kFloat64).data());
    EXPECT_DOUBLE_EQ(out.view({2})[0].item<double>(), 0.5);
    // Vertical axis uses the second flow channel.
    const auto col = torch::tensor({0.0, 1.0}).view({1, 2, 1});
    const auto vout = warp(col, FlowField::uniform(2, 1, 0.0, 0.25, torch::kFloat64).data());
    EXPECT_DOUBLE_EQ(vout.view({2})[0].item<double>(), 0.25);
}

TEST(Warp, RejectsMismatchAndNonFiniteFlow) {
    EXPECT_THROW(warp(torch::zeros({1, 4, 4}), torch::zeros({2, 4, 5})), DataError);
    auto nan_flow = torch::zeros({2, 4, 4});
    nan_flow[0][1][1] = std::nan("");
    EXPECT_THROW(warp(torch::zeros({1, 4, 4}), nan_flow), DataError);
}

TEST(Warp, GradientsMatchFiniteDifferences) {
    auto img = test::random_frames({3, 4, 4}, 11).requires_grad_(true);
    auto flow = (torch::rand({2, 4, 4}, torch::kFloat64) * 1.6 - 0.8 + 0.13).requires_grad_(true);
    const auto weights = test::random_frames({3, 4, 4}, 12);
    auto loss = [&] { return (warp(img, flow) * weights).sum(); };
    EXPECT_LT(test::gradient_error(loss, img), 1e-3);
    EXPECT_LT(test::gradient_error(loss, flow), 1e-3);
}

TEST(Warp, FrameFormKeepsColorSpace) {
    const Frame f(test::random_frames({3, 4, 4}, 13), ColorSpace::rgb);
    const auto w = warp(f, FlowField::zeros(4, 4, torch::kFloat64));
    EXPECT_EQ(w.color_space(), ColorSpace::rgb);
    EXPECT_TRUE(torch::equal(w.data(), f.data()));
}

// ---------------------------------------------------------------------------
// Masks

TEST(Masks, SoftMaskLaws) {
    const auto cur = torch::zeros({3, 1, 4}, torch::kFloat64);
    auto prev = torch::zeros({3, 1, 4}, torch::kFloat64);
    prev[0][0][1] = 0.1;                 // squared error 0.01
    prev[0][0][2] = 0.2;                 // 0.04
    prev[0][0][3] = std::sqrt(0.005);    // split over two channels: 0.01 total
    prev[1][0][3] = std::sqrt(0.005);
    const auto m = nonocclusion_mask(cur, prev, 50.0);
    EXPECT_EQ(m.sizes(), (std::vector<int64_t>{1, 1, 4}));
    EXPECT_EQ(m[0][0][0].item<double>(), 1.0);
    EXPECT_NEAR(m[0][0][1].item<double>(), std::exp(-0.5), 1e-9);
    EXPECT_NEAR(m[0][0][3].item<double>(), std::exp(-0.5), 1e-9);
    EXPECT_LT(m[0][0][2].item<double>(), m[0][0][1].item<double>());
    EXPECT_THROW(nonocclusion_mask(cur, prev, 0.0), UsageError);
    EXPECT_THROW(nonocclusion_mask(cur, torch::zeros({3, 1, 5}, torch::kFloat64), 50.0), DataError);
}

TEST(Masks, SoftMaskIsOneOnlyAtZeroError) {
    const auto cur = test::random_frames({3, 6, 6}, 21);
    auto prev = cur.clone();
    prev.index_put_({torch::indexing::Slice(), torch::indexing::Slice(0, 3)}, 0.0);
    const auto m = nonocclusion_mask(cur, prev, 50.0);
    const auto zero_err = (cur - prev).pow(2).sum(0, true) == 0;
    EXPECT_TRUE(torch::equal(m == 1.0, zero_err));
}

TEST(Masks, SoftMaskMonotoneInError) {
    const auto err = torch::linspace(0.0, 2.0, 200, torch::kFloat64).view({1, 1, 200});
    const auto m = nonocclusion_mask(torch::zeros_like(err), err, 50.0).view({200});
    EXPECT_TRUE((m.slice(0, 1) <= m.slice(0, 0, 199)).all().item<bool>());
    EXPECT_TRUE((m > 0).all().item<bool>());
}

TEST(Masks, BinaryMaskThresholds) {
    const auto cur = torch::zeros({1, 2, 2}, torch::kFloat64);
    const auto prev = torch::tensor({0.0, 1.0, 1.0, 0.0}, torch::kFloat64).view({1, 2, 2});
    const auto m = binary_mask(cur, prev, 0.5);
    EXPECT_TRUE(torch::equal(m, (prev == 0).to(torch::kFloat64)));
    EXPECT_TRUE(torch::equal(binary_mask(cur, cur, 1e-9), torch::ones_like(cur)));
    EXPECT_TRUE(torch::equal(binary_mask(cur, prev + 2, 0.5), torch::zeros_like(cur)));
    EXPECT_THROW(binary_mask(cur, prev, 0.0), UsageError);
}

TEST(Masks, ComposeUniformFlows) {
    const auto a = FlowField::uniform(5, 5, 1.0, -1.0);
    const auto b = FlowField::uniform(5, 5, 2.0, 0.0);
    const auto c = compose_flows(b, a);
    EXPECT_TRUE(torch::equal(c.data(), FlowField::uniform(5, 5, 3.0, -1.0).data()));
}

// ---------------------------------------------------------------------------
// Synthetic clips

synth::SynthSpec pan_spec(int dx, int dy, int length = 6) {
    synth::SynthSpec s;
    s.height = 24;
    s.width = 32;
    s.length = length;
    s.dx = dx;
    s.dy = dy;
    return s;
}

double max_masked_diff(const torch::Tensor& a, const torch::Tensor& b, const torch::Tensor& mask) {
    return ((a - b).abs() * mask).max().item<double>();
}

TEST(Synth, UniformTranslationFlowsAreConstant) {
    const auto clip = synth::make_clip(pan_spec(2, -1), 3);
    ASSERT_EQ(clip.flows.size(), 5u);
    EXPECT_TRUE(torch::equal(clip.flows[0].data(), FlowField::uniform(24, 32, 2, -1).data()));
    const auto& d = clip.pair_flows.at({1, 4});
    EXPECT_TRUE(torch::equal(d, FlowField::uniform(24, 32, 6, -3).data()));
    EXPECT_EQ(clip.pair_flows.size(), 15u);  // every (m, t), m < t, for length 6
}

TEST(Synth, WarpReproducesFramesOnCleanPixels) {
    auto spec = synth::random_spec(32, 32, 7, 2, 2, 17);
    const auto clip = synth::make_clip(spec, 17);
    for (const auto& [pair, flow] : clip.pair_flows) {
        const auto src = clip.frames[static_cast<size_t>(pair.first - 1)].data();
        const auto dst = clip.frames[static_cast<size_t>(pair.second - 1)].data();
        EXPECT_LT(max_masked_diff(warp(src, flow), dst, clip.pair_masks.at(pair)), 1e-5);
    }
}

TEST(Synth, ZeroMotionGivesZeroFlowsAndFullMasks) {
    const auto clip = synth::make_clip(pan_spec(0, 0, 4), 1);
    for (const auto& f : clip.flows) EXPECT_EQ(f.data().abs().max().item<double>(), 0.0);
    for (const auto& m : clip.masks) EXPECT_EQ(m.data().min().item<double>(), 1.0);
    for (size_t t = 1; t < clip.frames.length(); ++t) {
        EXPECT_TRUE(torch::equal(clip.frames[t].data(), clip.frames[0].data()));
    }
}

TEST(Synth, OcclusionMasksMarkRevealedAndOutOfFrameRegions) {
    auto spec = pan_spec(2, 0, 3);
    const auto clip = synth::make_clip(spec, 2);
    // Backward flow +2: the two rightmost columns sample outside frame m.
    const auto m = clip.masks[0].data();
    EXPECT_EQ(m.index({0, torch::indexing::Slice(), torch::indexing::Slice(30, 32)}).max().item<double>(), 0.0);
    EXPECT_EQ(m.index({0, torch::indexing::Slice(), torch::indexing::Slice(0, 30)}).min().item<double>(), 1.0);

    synth::SynthSpec s2 = pan_spec(0, 0, 2);
    s2.sprites.push_back({10, 8, 3, 0, 6, 6, false});
    const auto c2 = synth::make_clip(s2, 4);
    const auto m2 = c2.masks[0].data()[0];
    // Background pixels uncovered by the sprite's trailing edge are occluded in frame 0.
    EXPECT_EQ(m2[10][10].item<double>(), 0.0);
    EXPECT_EQ(m2[10][12].item<double>(), 0.0);
    EXPECT_EQ(m2[10][13].item<double>(), 1.0);  // sprite pixel, visible in frame 0
    EXPECT_EQ(m2[0][0].item<double>(), 1.0);
}

TEST(Synth, CompositionLawHoldsForPiecewiseMotion) {
    auto spec = pan_spec(0, 0, 7);
    spec.segments = {{2, 1, 0}, {2, -2, 1}, {1, 0, -1}};
    const auto clip = synth::make_clip(spec, 5);
    for (int t = 2; t <= 7; ++t) {
        auto composed = clip.flows[0].data();
        for (int k = 1; k < t - 1; ++k) composed = compose_flows(clip.flows[static_cast<size_t>(k)].data(), composed);
        const auto exact = clip.pair_flows.at({1, t});
        const auto mask = clip.pair_masks.at({1, t});
        EXPECT_LT(max_masked_diff(composed, exact, mask), 1e-5) << "t=" << t;
    }
}

TEST(Synth, SelfWarpErrorIsZeroWithExactMasks) {
    const auto clip = synth::make_clip(synth::random_spec(32, 32, 6, 2, 2, 23), 23);
    EXPECT_LT(warp_error(clip.frames, clip.flows, clip.masks).value, 1e-6);
}

TEST(Synth, DeterministicPerSeedAndRejectsBadSpecs) {
    const auto a = synth::make_clip(synth::random_spec(16, 16, 3, 1, 1, 8), 8);
    const auto b = synth::make_clip(synth::random_spec(16, 16, 3, 1, 1, 8), 8);
    const auto c = synth::make_clip(synth::random_spec(16, 16, 3, 1, 1, 9), 9);
    EXPECT_TRUE(torch::equal(a.frames.stacked(), b.frames.stacked()));
    EXPECT_FALSE(torch::equal(a.frames.stacked(), c.frames.stacked()));
    EXPECT_THROW(synth::make_clip(pan_spec(9, 0), 1), UsageError);  // 9 > 32 / 4
    EXPECT_THROW(synth::make_clip(pan_spec(0, 7), 1), UsageError);  // 7 > 24 / 4
    auto zero_len = pan_spec(0, 0);
    zero_len.length = 0;
    EXPECT_THROW(synth::make_clip(zero_len, 1), UsageError);
}

TEST(Synth, ExportImportRoundTrip) {
    TempDir dir("synth");
    const auto clip = synth::make_clip(synth::random_spec(16, 16, 5, 2, 1, 31), 31);
    synth::export_clip(clip.frames, clip.flows, dir.path() / "v");
    size_t count = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path() / "v")) ++count;
    EXPECT_EQ(count, 5u + 4u);
    const auto back = synth::import_clip(dir.path() / "v");
    ASSERT_EQ(back.frames.length(), 5u);
    for (size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(std::memcmp(back.flows[k].data().data_ptr(), clip.flows[k].data().contiguous().data_ptr(),
                              clip.flows[k].data().nbytes()),
                  0);
    }
    EXPECT_LE((back.frames.stacked() - clip.frames.stacked()).abs().max().item<double>(), 1.0 / 255.0 + 1e-6);
    EXPECT_THROW(synth::export_clip(clip.frames, {}, dir.path() / "w"), DataError);
}

TEST(Synth, ExportToUnwritableLocationFails) {
    TempDir dir("ro");
    const auto file = dir.path() / "file";
    std::ofstream(file) << "x";
    const auto clip = synth::make_clip(pan_spec(1, 0, 2), 1);
    EXPECT_THROW(synth::export_clip(clip.frames, clip.flows, file / "sub"), DataError);
}

}  // namespace
}  // namespace vcgan
