#include <gtest/gtest.h>

#include "samodal/backends.hpp"
#include "samodal/pipeline.hpp"
#include "support/scenes.hpp"

using namespace samodal;

namespace {

ObjectSpec rect(std::uint32_t id, int rows, int cols, double h, double w, Displacement v, int depth)
{
    ObjectSpec o;
    o.id = InstanceId{id};
    o.shape = Shape::rect(rows, cols);
    o.start_h = h;
    o.start_w = w;
    o.velocity = v;
    o.depth = depth;
    o.class_label = static_cast<int>(id);
    return o;
}

// A (id 1) partly behind B (id 2); C (id 3) fully behind B at frame 1.
SyntheticVideo overlap_scene()
{
    SceneSpec s{"overlap", {12, 12}, 3,
                {rect(1, 4, 4, 2, 2, {2, 1}, 1), rect(2, 5, 5, 4, 4, {}, 3), rect(3, 2, 2, 5, 5, {}, 2)}, 0};
    return generate(s);
}

}  // namespace

TEST(OracleVisible, ReturnsGroundTruthVisibleAndSkipsHidden)
{
    const auto v = overlap_scene();
    OracleVisible vis(v);
    const auto out = vis.predict(1, v.frame(1).image);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].id, InstanceId{1});
    EXPECT_EQ(out[0].mask, v.frame(1).find(InstanceId{1})->visible);
    EXPECT_EQ(out[0].class_label, 1);
    EXPECT_EQ(out[1].id, InstanceId{2});
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = i + 1; j < out.size(); ++j)
            EXPECT_EQ(intersect(out[i].mask, out[j].mask).area(), 0u);
}

TEST(OracleVisible, ThresholdSuppressesMostlyHidden)
{
    const auto v = overlap_scene();
    const auto* a = v.frame(1).find(InstanceId{1});
    const double ratio = static_cast<double>(a->visible.area()) / a->amodal.area();
    OracleVisible strict(v, ratio);
    for (const auto& p : strict.predict(1, v.frame(1).image))
        EXPECT_NE(p.id, InstanceId{1});
    EXPECT_THROW(OracleVisible(v, 1.0), InvalidArgument);
}

TEST(NoisyVisible, DropRateOneDropsEverything)
{
    const auto v = overlap_scene();
    NoisyVisible vis(v, 1.0, 0, 1, 7);
    for (const auto& f : v.frames)
        EXPECT_TRUE(vis.predict(f.t, f.image).empty());
}

TEST(NoisyVisible, StartFrameAndDilation)
{
    const auto v = overlap_scene();
    NoisyVisible late(v, 1.0, 0, 2, 7);
    EXPECT_EQ(late.predict(1, v.frame(1).image).size(), 2u);
    EXPECT_TRUE(late.predict(2, v.frame(2).image).empty());

    NoisyVisible fat(v, 0.0, 1, 1, 7);
    const auto out = fat.predict(1, v.frame(1).image);
    EXPECT_EQ(out[1].mask, dilate(v.frame(1).find(InstanceId{2})->visible, 3));
}

TEST(NoisyVisible, DeterministicGivenSeed)
{
    const auto v = generate(random_scene({}, 3));
    NoisyVisible a(v, 0.5, 1, 1, 42), b(v, 0.5, 1, 1, 42);
    for (const auto& f : v.frames)
        EXPECT_EQ(a.predict(f.t, f.image), b.predict(f.t, f.image));
}

TEST(OracleAmodal, PromptInsideVisibleGivesAmodal)
{
    const auto v = overlap_scene();
    const auto& f = v.frame(1);
    const auto* a = f.find(InstanceId{1});
    OracleAmodal amodal(v);
    for (auto p : a->visible.indices()) {
        EXPECT_EQ(amodal.predict(1, f.image, PointTuple::positive({p}), InstanceId{1}), a->amodal);
        EXPECT_EQ(amodal.predict(1, f.image, PointTuple::positive({p}), std::nullopt), a->amodal);
    }
}

TEST(ConfusableOracleAmodal, FollowsTheOwnerOfThePrompt)
{
    const auto v = overlap_scene();
    const auto& f = v.frame(1);
    ConfusableOracleAmodal amodal(v);
    const auto on_b = f.find(InstanceId{2})->visible.indices().front();
    EXPECT_EQ(amodal.predict(1, f.image, PointTuple::positive({on_b}), InstanceId{1}), f.find(InstanceId{2})->amodal);
    const PixelIndex background{v.dims.size()};
    ASSERT_EQ(f.image.at(background), 0u);
    EXPECT_TRUE(amodal.predict(1, f.image, PointTuple::positive({background}), InstanceId{1}).empty());

    // Majority vote over several points; ties to the first owner seen.
    const auto on_a = f.find(InstanceId{1})->visible.indices().front();
    EXPECT_EQ(amodal.predict(1, f.image, PointTuple::positive({on_b, on_a, on_a}), {}), f.find(InstanceId{1})->amodal);
    EXPECT_EQ(amodal.predict(1, f.image, PointTuple::positive({on_b, on_a}), {}), f.find(InstanceId{2})->amodal);
    EXPECT_THROW(amodal.predict(1, f.image, PointTuple{}, {}), InvalidArgument);
}

TEST(OracleTracker, MovesPointsByGroundTruthTranslation)
{
    // Object 1 moves (2, -1) per frame; object 2 is static and never in the way.
    SceneSpec s{"track", {20, 20}, 3, {rect(1, 3, 3, 2, 10, {2, -1}, 1), rect(2, 2, 2, 17, 17, {}, 2)}, 0};
    const auto v = generate(s);
    const auto images = images_of(v);
    OracleTracker tracker(v);
    const auto query = v.frame(1).find(InstanceId{1})->visible.indices();
    const auto r = tracker.track(3, images, 1, query, InstanceId{1});
    for (std::size_t i = 0; i < query.size(); ++i) {
        auto c = to_coord(v.dims, query[i]);
        EXPECT_EQ(to_coord(v.dims, r.points[i]), (Coord{c.h + 4, c.w - 2}));
        EXPECT_EQ(r.occluded[i], 0);
        EXPECT_EQ(r.clipped[i], 0);
    }
    const auto still = v.frame(1).find(InstanceId{2})->visible.indices();
    EXPECT_EQ(tracker.track(3, images, 1, still, InstanceId{2}).points, still);
}

TEST(OracleTracker, FlagsOcclusionAndClipping)
{
    const auto v = overlap_scene();
    const auto images = images_of(v);
    OracleTracker tracker(v);
    // C is hidden behind B: its own pixels are covered at every frame.
    const auto c_pixels = v.frame(1).find(InstanceId{3})->amodal.indices();
    const auto r = tracker.track(2, images, 1, c_pixels, InstanceId{3});
    for (auto o : r.occluded)
        EXPECT_EQ(o, 1);

    SceneSpec s{"edge", {6, 6}, 2, {rect(1, 2, 2, 5, 5, {3, 3}, 1)}, 0};
    const auto e = generate(s);
    const auto ei = images_of(e);
    const std::vector<PixelIndex> q{to_index(e.dims, {5, 5})};
    const auto rc = OracleTracker(e).track(2, ei, 1, q, InstanceId{1});
    EXPECT_EQ(rc.points[0], to_index(e.dims, {6, 6}));
    EXPECT_EQ(rc.clipped[0], 1);
}

TEST(NoisyTracker, ZeroSigmaEqualsOracle)
{
    const auto v = generate(random_scene({}, 11));
    const auto images = images_of(v);
    OracleTracker exact(v);
    NoisyTracker noisy(v, 0.0, 5);
    for (const auto& inst : v.frame(1).instances) {
        const auto q = inst.amodal.indices();
        EXPECT_EQ(noisy.track(5, images, 1, q, inst.id), exact.track(5, images, 1, q, inst.id));
    }
    NoisyTracker jitter(v, 2.0, 5), again(v, 2.0, 5);
    const auto q = v.frame(1).instances[0].amodal.indices();
    EXPECT_EQ(jitter.track(4, images, 1, q, v.frame(1).instances[0].id),
              again.track(4, images, 1, q, v.frame(1).instances[0].id));
}

TEST(BackendChoice, Parsing)
{
    auto v = parse_visible_choice("oracle:0.25");
    EXPECT_EQ(v.kind, VisibleChoice::Kind::Oracle);
    EXPECT_DOUBLE_EQ(v.min_visibility, 0.25);
    v = parse_visible_choice("noisy:0.3:2:4");
    EXPECT_EQ(v.kind, VisibleChoice::Kind::Noisy);
    EXPECT_DOUBLE_EQ(v.drop_rate, 0.3);
    EXPECT_EQ(v.dilate_radius, 2);
    EXPECT_EQ(v.from_frame, 4);
    EXPECT_EQ(parse_visible_choice("bridge").kind, VisibleChoice::Kind::Bridge);
    EXPECT_THROW(parse_visible_choice("noisy"), InvalidArgument);
    EXPECT_THROW(parse_visible_choice("noisy:1.5"), InvalidArgument);
    EXPECT_THROW(parse_visible_choice("oracle:1"), InvalidArgument);
    EXPECT_EQ(parse_amodal_choice("confusable").kind, AmodalChoice::Kind::Confusable);
    EXPECT_THROW(parse_amodal_choice("sam"), InvalidArgument);
    EXPECT_DOUBLE_EQ(parse_tracker_choice("noisy:1.5").sigma, 1.5);
    EXPECT_THROW(parse_tracker_choice("noisy:-1"), InvalidArgument);
    EXPECT_THROW(parse_tracker_choice("noisy:abc"), InvalidArgument);
}
