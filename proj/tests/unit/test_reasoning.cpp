#include <filesystem>
#include <random>

#include "amflow/io.hpp"
#include "amflow/reasoning.hpp"
#include "doctest.h"
#include "support/reasoning_fixtures.hpp"

using namespace am::reasoning;
using am::netlist::recovery_score;
namespace fs = std::filesystem;
namespace t = am::testing;

namespace {

struct Artifacts {
  fs::path dir;
  std::string raw, overlay;
  Artifacts() {
    dir = fs::temp_directory_path() / "am_test_reasoning";
    fs::create_directories(dir);
    raw = (dir / "raw.png").string();
    overlay = (dir / "overlay.png").string();
    am::write_file(raw, "raw-bytes");
    am::write_file(overlay, "overlay-bytes");
  }
  ~Artifacts() { fs::remove_all(dir); }
};

ReasoningConfig no_micl() {
  ReasoningConfig c;
  c.micl = false;
  return c;
}

std::vector<BranchHypothesis> three(am::netlist::NetlistIR raw, am::netlist::NetlistIR ann,
                                    am::netlist::NetlistIR dual) {
  return {t::hyp(BranchId::Raw, std::move(raw)), t::hyp(BranchId::Annotated, std::move(ann)),
          t::hyp(BranchId::Dual, std::move(dual))};
}

}  // namespace

TEST_CASE("build_branch_inputs: ids, images, flags") {
  Artifacts a;
  const auto inputs = build_branch_inputs(a.raw, {a.overlay, R"({"regions":[]})"}, no_micl());
  CHECK(inputs[0].id == BranchId::Raw);
  CHECK(inputs[1].id == BranchId::Annotated);
  CHECK(inputs[2].id == BranchId::Dual);
  CHECK(inputs[0].images.size() == 1);
  CHECK(inputs[1].images.size() == 1);
  CHECK(inputs[2].images == std::vector<std::string>{a.raw, a.overlay});
  for (const auto& b : inputs) {
    CHECK_FALSE(b.micl_exemplar.has_value());
    CHECK(b.cot_prompt.find("equipotential") != std::string::npos);
    CHECK(b.cot_prompt.find("Step 1.") != std::string::npos);
  }
  CHECK(inputs[1].cot_prompt.find("Node map") != std::string::npos);
  CHECK(inputs[0].cot_prompt.find("Node map") == std::string::npos);

  auto plain = no_micl();
  plain.cot = false;
  for (const auto& b : build_branch_inputs(a.raw, {a.overlay, "{}"}, plain))
    CHECK(b.cot_prompt.find("Step 1.") == std::string::npos);

  auto micl = ReasoningConfig{};
  CHECK_THROWS_AS(build_branch_inputs(a.raw, {a.overlay, "{}"}, micl), MissingArtifact);
  micl.exemplar = MiclExemplar{{a.raw}, "example prompt", "example answer"};
  const auto with = build_branch_inputs(a.raw, {a.overlay, "{}"}, micl);
  for (const auto& b : with) REQUIRE(b.micl_exemplar.has_value());
  const auto req = branch_request(with[2], micl);
  REQUIRE(req.messages.size() == 4);
  CHECK(req.messages[2].role == am::llm::Role::Assistant);
  CHECK(req.tag == "branch:dual");

  CHECK_THROWS_AS(build_branch_inputs((a.dir / "none.png").string(), {a.overlay, "{}"}, no_micl()),
                  MissingArtifact);
}

TEST_CASE("load_exemplar reads the committed exemplar") {
  const auto ex = load_exemplar(AM_SOURCE_DIR "/fixtures/micl");
  CHECK(ex.images.size() == 1);
  CHECK(am::file_exists(ex.images[0]));
  CHECK(extract_spice_block(ex.response).has_value());
}

TEST_CASE("extract_spice_block and run_branch parsing") {
  CHECK(extract_spice_block("no fence here") == std::nullopt);
  const std::string chatter = "Sure.\n```text\nnot it\n```\n```spice\nR1 a b 1k\n.end\n```\nHope this helps! M9 x\n";
  CHECK(*extract_spice_block(chatter) == "R1 a b 1k\n.end\n");
  CHECK(*extract_spice_block("```\nR1 a 0 1k\n```") == "R1 a 0 1k\n");

  Artifacts a;
  const auto inputs = build_branch_inputs(a.raw, {a.overlay, "{}"}, no_micl());
  for (const std::string& reply : {std::string("```spice\n") + t::kAmp5T + "```", std::string("The circuit is an amplifier."),
                                  std::string("```spice\n") + t::kAmp5T + "```\nLet me know if you need more. M1 broken"}) {
    am::llm::ScriptedGateway gw([&](const am::llm::ChatRequest&) { return reply; });
    const auto h = run_branch(inputs[0], gw, no_micl());
    CHECK(h.trace == reply);
    if (reply.find("```") == std::string::npos) {
      CHECK_FALSE(h.netlist.has_value());
      CHECK_FALSE(h.parse_error.empty());
    } else {
      REQUIRE(h.netlist.has_value());
      CHECK(recovery_score(*h.netlist, t::amp5t()).exact_match);
    }
  }
  am::llm::ScriptedGateway bad([](const am::llm::ChatRequest&) { return std::string("```spice\nM1 d g\n```"); });
  const auto h = run_branch(inputs[0], bad, no_micl());
  CHECK_FALSE(h.netlist.has_value());
  CHECK(h.parse_error.find("line") != std::string::npos);
}

TEST_CASE("run_branches issues the three requests concurrently") {
  Artifacts a;
  const auto inputs = build_branch_inputs(a.raw, {a.overlay, "{}"}, no_micl());
  am::llm::ScriptedGateway gw([](const am::llm::ChatRequest& r) {
    return "tag " + r.tag + "\n```spice\n" + t::kAmp5T + "```";
  });
  const auto hs = run_branches(inputs, gw, no_micl());
  CHECK(gw.calls() == 3);
  CHECK(hs[1].id == BranchId::Annotated);
  CHECK(hs[1].trace.find("branch:annotated") != std::string::npos);
}

TEST_CASE("consensus: unanimity and plain majority") {
  const auto truth = t::amp5t();
  const auto same = fuse(three(truth, t::relabeled(truth, "_a"), t::relabeled(truth, "_b")), nullptr, no_micl());
  CHECK(same.valid);
  CHECK(same.stage == FusionStage::Consensus);
  CHECK(recovery_score(same.netlist, truth).exact_match);

  const auto maj = fuse(three(truth, truth, t::flip_kind(truth, 4)), nullptr, no_micl());
  CHECK(recovery_score(maj.netlist, truth).exact_match);
  // The outvoted branch is also the preferred one under the tie-break.
  const auto maj2 = fuse(three(truth, t::flip_kind(truth, 2), t::relabeled(truth, "_q")), nullptr, no_micl());
  CHECK(recovery_score(maj2.netlist, truth).exact_match);
}

TEST_CASE("consensus: each branch wrong on a disjoint device") {
  const auto truth = t::amp5t();
  const auto raw = t::flip_kind(truth, 0);
  const auto ann = t::relabeled(t::rewire(truth, 3, 0, "n1"), "_a");
  const auto dual = t::relabeled(t::flip_kind(truth, 4), "_d");
  for (const auto& h : {raw, ann, dual}) CHECK_FALSE(recovery_score(h, truth).exact_match);
  const auto fused = fuse(three(raw, ann, dual), nullptr, no_micl());
  CHECK(recovery_score(fused.netlist, truth).exact_match);
  CHECK(fused.valid);
}

TEST_CASE("consensus is invariant to hypothesis order") {
  const auto truth = t::amp5t();
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<BranchHypothesis> hs = three(t::flip_kind(truth, static_cast<std::size_t>(trial % 5)),
                                             t::rewire(truth, static_cast<std::size_t>(trial % 4), 0, "vdd"),
                                             t::relabeled(truth, "_r"));
    const auto base = am::netlist::canonicalize(consensus(hs, no_micl()));
    for (int p = 0; p < 5; ++p) {
      std::shuffle(hs.begin(), hs.end(), rng);
      CHECK(am::netlist::canonicalize(consensus(hs, no_micl())) == base);
    }
  }
}

TEST_CASE("one correct branch plus two with distinct single errors fuses exactly") {
  const auto truth = t::amp5t();
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      if (i == j) continue;
      for (int slot = 0; slot < 3; ++slot) {
        std::vector<am::netlist::NetlistIR> v{t::flip_kind(truth, i), t::relabeled(t::flip_kind(truth, j), "_z"), truth};
        std::rotate(v.begin(), v.begin() + slot, v.end());
        const auto fused = fuse(three(v[0], v[1], v[2]), nullptr, no_micl());
        INFO(i, " ", j, " ", slot); CHECK(recovery_score(fused.netlist, truth).exact_match);
      }
    }
}

TEST_CASE("intent stage resolves three-way disagreement; consensus alone cannot") {
  const auto truth = t::amp5t();
  // All three branches disagree about the drain of M4 and none is right.
  const auto hs = three(t::rewire(truth, 3, 0, "tail"), t::rewire(truth, 3, 0, "n1"), t::rewire(truth, 3, 0, "vb"));
  auto off = no_micl();
  off.intent = false;
  CHECK_FALSE(recovery_score(fuse(hs, nullptr, off).netlist, truth).exact_match);

  am::llm::ScriptedGateway fixer([&](const am::llm::ChatRequest& r) {
    CHECK(r.tag == "fusion");
    CHECK(r.messages[1].text.find("### Consensus draft") != std::string::npos);
    return std::string("Reconciled.\n```spice\n") + t::kAmp5T + "```";
  });
  const auto on = fuse(hs, &fixer, no_micl());
  CHECK(on.stage == FusionStage::Llm);
  CHECK(recovery_score(on.netlist, truth).exact_match);

  am::llm::ScriptedGateway broken([](const am::llm::ChatRequest&) { return std::string("```spice\nR1 a b 1k\n```"); });
  const auto kept = fuse(hs, &broken, no_micl());
  CHECK(kept.stage == FusionStage::Consensus);
  CHECK_FALSE(kept.notes.empty());
}

TEST_CASE("disabling intent lowers exact-match rate on a corrupted corpus") {
  const auto truth = t::amp5t();
  const std::vector<std::string> nets{"tail", "n1", "vb", "out", "inp"};
  am::llm::ScriptedGateway fixer([&](const am::llm::ChatRequest&) {
    return std::string("```spice\n") + t::kAmp5T + "```";
  });
  int with = 0, without = 0, total = 0;
  auto off = no_micl();
  off.intent = false;
  for (std::size_t dev = 0; dev < 5; ++dev) {
    // Majority-correct case.
    auto easy = three(t::rewire(truth, dev, 0, "vb"), truth, t::relabeled(truth, "_e"));
    // Three-way disagreement on one port.
    auto hard = three(t::rewire(truth, dev, 1, "tail"), t::rewire(truth, dev, 1, "nx"), t::rewire(truth, dev, 1, "ny"));
    for (const auto& hs : {easy, hard}) {
      ++total;
      with += recovery_score(fuse(hs, &fixer, no_micl()).netlist, truth).exact_match;
      without += recovery_score(fuse(hs, nullptr, off).netlist, truth).exact_match;
    }
  }
  CHECK(with == total);
  CHECK(without < with);
  CHECK(without >= 5);
}

TEST_CASE("fuse rejects a batch with nothing parsable") {
  BranchHypothesis h;
  h.trace = "prose";
  CHECK_THROWS_AS(fuse({h, h, h}, nullptr, no_micl()), NoParsableHypothesis);
  const auto truth = t::amp5t();
  const auto single = fuse({h, t::hyp(BranchId::Dual, truth), h}, nullptr, no_micl());
  CHECK(recovery_score(single.netlist, truth).exact_match);
}

TEST_CASE("validity check") {
  CHECK(is_valid_candidate(t::amp5t()));
  CHECK_FALSE(is_valid_candidate(am::netlist::parse_spice("R1 a b 1k\n")));
  CHECK_FALSE(is_valid_candidate(am::netlist::parse_spice("R1 vdd x 1k\nR2 vdd 0 1k\n")));
}

TEST_CASE("joint_pass_lower_bound") {
  CHECK(joint_pass_lower_bound({0.5, 0.5, 0.5}) == doctest::Approx(0.875));
  CHECK(joint_pass_lower_bound({1.0, 0.0, 0.0}) == 1.0);
  CHECK(joint_pass_lower_bound({0.3, 0.4, 0.5}) == doctest::Approx(0.79));
  CHECK_THROWS_AS(joint_pass_lower_bound({0.3, 1.2, 0.5}), am::DomainError);
  CHECK_THROWS_AS(joint_pass_lower_bound({-0.1}), am::DomainError);

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> p{u(rng), u(rng), u(rng)};
    const double b = joint_pass_lower_bound(p);
    CHECK(b >= *std::max_element(p.begin(), p.end()) - 1e-15);
    const double mn = *std::min_element(p.begin(), p.end());
    CHECK(b >= 1.0 - std::pow(1.0 - mn, 3) - 1e-15);
    const double q = u(rng);
    CHECK(joint_pass_lower_bound({q, q, q}) == doctest::Approx(1.0 - std::pow(1.0 - q, 3)));
  }
}

TEST_CASE("independent branches: Monte-Carlo union success matches the bound") {
  std::mt19937_64 rng(2024);
  const std::vector<double> p{0.3, 0.4, 0.5};
  std::bernoulli_distribution b0(p[0]), b1(p[1]), b2(p[2]);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += b0(rng) || b1(rng) || b2(rng);
  CHECK(std::abs(static_cast<double>(hits) / n - joint_pass_lower_bound(p)) < 0.01);
}
