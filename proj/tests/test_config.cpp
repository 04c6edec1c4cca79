#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "camel/config.hpp"

using namespace camel;

TEST_CASE("config text round-trips through the parser") {
    RunConfig c = preset("set3");
    c.seed = 77;
    c.lr = 0.000123;
    c.ablation = Ablation::BaseIDp;
    c.streams[0].noise = 0.07;
    c.streams[0].sea_thetas = {8.0, 9.5};

    const std::string text = config_to_text(c);
    RunConfig back = parse_config_text(text);
    CHECK(back.seed == c.seed);
    CHECK(back.window_size == c.window_size);
    CHECK(back.max_windows == c.max_windows);
    CHECK(back.latent_dim == c.latent_dim);
    CHECK(back.expert_dim == c.expert_dim);
    CHECK(back.lr == c.lr);  // exact: shortest round-trip formatting
    CHECK(back.mmd_threshold == c.mmd_threshold);
    CHECK(back.util_threshold == c.util_threshold);
    CHECK(back.drop_factor == c.drop_factor);
    CHECK(back.ablation == c.ablation);
    REQUIRE(back.streams.size() == c.streams.size());
    for (size_t i = 0; i < c.streams.size(); ++i) {
        CHECK(back.streams[i].kind == c.streams[i].kind);
        CHECK(back.streams[i].features == c.streams[i].features);
        CHECK(back.streams[i].classes == c.streams[i].classes);
        CHECK(back.streams[i].noise == c.streams[i].noise);
        CHECK(back.streams[i].samples == c.streams[i].samples);
        CHECK(back.streams[i].incremental == c.streams[i].incremental);
        REQUIRE(back.streams[i].drifts.size() == c.streams[i].drifts.size());
        for (size_t d = 0; d < c.streams[i].drifts.size(); ++d) {
            CHECK(back.streams[i].drifts[d].kind == c.streams[i].drifts[d].kind);
            CHECK(back.streams[i].drifts[d].window == c.streams[i].drifts[d].window);
        }
    }
    CHECK(back.streams[0].sea_thetas == c.streams[0].sea_thetas);
    // a second round trip is textually identical
    CHECK(config_to_text(back) == text);
}

TEST_CASE("presets carry the documented per-set values") {
    RunConfig s1 = preset("set1");
    CHECK(s1.latent_dim == 20);
    CHECK(s1.expert_dim == 20);
    CHECK(s1.mmd_threshold == 0.05);
    CHECK(s1.util_threshold == 0.07);

    RunConfig s2 = preset("set2");
    CHECK(s2.latent_dim == 4);
    CHECK(s2.mmd_threshold == 0.05);
    CHECK(s2.util_threshold == 0.07);

    RunConfig s3 = preset("set3");
    CHECK(s3.latent_dim == 8);
    CHECK(s3.expert_dim == 8);
    CHECK(s3.mmd_threshold == 0.07);
    CHECK(s3.util_threshold == 0.1);
    REQUIRE(s3.streams.size() == 3);
    CHECK(s3.streams[0].kind == GeneratorKind::Sea);
    CHECK(s3.streams[0].noise == 0.1);
    CHECK(s3.streams[1].kind == GeneratorKind::RandomTree);
    CHECK(s3.streams[2].kind == GeneratorKind::Rbf);
    CHECK(s3.streams[2].incremental);

    RunConfig s4 = preset("set4");
    CHECK(s4.latent_dim == 30);
    CHECK(s4.mmd_threshold == 0.1);
    CHECK(s4.util_threshold == 0.1);

    CHECK_THROWS_AS(preset("set9"), std::invalid_argument);

    for (const std::string& name : preset_names()) CHECK_NOTHROW(preset(name).validate());
}

TEST_CASE("defaults mirror the published training setup") {
    RunConfig c;
    CHECK(c.lr == 1e-4);
    CHECK(c.init_epochs == 100);
    CHECK(c.window_epochs == 30);
    CHECK(c.mmd_sigma == 0.15);
    CHECK(c.window_size == 100);
    CHECK(c.effective_ref_size() == 25);
    CHECK(c.cooldown == 2);
    CHECK(c.lookback == 5);
    CHECK(c.drop_factor == 0.95);
    CHECK(c.heads == 2);
    CHECK(c.hidden_dim == 50);
}

TEST_CASE("validation rejects broken configs") {
    RunConfig c = preset("set3");
    CHECK_NOTHROW(c.validate());

    RunConfig no_streams = c;
    no_streams.streams.clear();
    CHECK_THROWS_AS(no_streams.validate(), std::invalid_argument);

    RunConfig odd = c;
    odd.latent_dim = 7;
    CHECK_THROWS_AS(odd.validate(), std::invalid_argument);

    RunConfig tiny_window = c;
    tiny_window.window_size = 4;
    CHECK_THROWS_AS(tiny_window.validate(), std::invalid_argument);

    RunConfig bad_tau = c;
    bad_tau.mmd_threshold = 0.0;
    CHECK_THROWS_AS(bad_tau.validate(), std::invalid_argument);
}

TEST_CASE("parser errors carry the line number") {
    try {
        parse_config_text("seed = 1\nwhat is this\n", "inline");
        FAIL("expected a parse error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("inline:2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text("mystery = 1\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("[stream]\nkind = warp\n"), std::invalid_argument);
}

TEST_CASE("drift schedules parse from the compact syntax") {
    RunConfig c = parse_config_text(
        "seed = 3\n[stream]\nkind = sea\ndrift = sudden@25,gradual@50,incremental\n");
    REQUIRE(c.streams.size() == 1);
    const GeneratorSpec& s = c.streams[0];
    REQUIRE(s.drifts.size() == 2);
    CHECK(s.drifts[0].kind == DriftEvent::Kind::Sudden);
    CHECK(s.drifts[0].window == 25);
    CHECK(s.drifts[1].kind == DriftEvent::Kind::Gradual);
    CHECK(s.drifts[1].window == 50);
    CHECK(s.incremental);
}

TEST_CASE("overrides apply by key") {
    RunConfig c = preset("set3");
    apply_override(c, "seed", "99");
    apply_override(c, "ablation", "base-i");
    apply_override(c, "max_windows", "5");
    CHECK(c.seed == 99);
    CHECK(c.ablation == Ablation::BaseI);
    CHECK(c.max_windows == 5);
    CHECK_THROWS_AS(apply_override(c, "nope", "1"), std::invalid_argument);
    CHECK_THROWS_AS(apply_override(c, "ablation", "bogus"), std::invalid_argument);
}

TEST_CASE("ablation names round-trip") {
    for (Ablation a : {Ablation::Base, Ablation::BaseI, Ablation::BaseIDp, Ablation::Full})
        CHECK(ablation_from_string(to_string(a)) == a);
}
