#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cvfr/checkpoint.hpp"
#include "test_helpers.hpp"

using namespace cvfr;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

Model make_model(std::uint64_t seed) {
    auto [sc, attractors] = testutil::planted_model(6, 2, seed);
    // Perturb a few free entries so the checkpoint is not a fresh init.
    sc.eigvecs(0, 3) = 0.123456789012345678;
    sc.eigvals[4] = -0.987654321;
    Model m;
    m.coupling = std::move(sc);
    m.attractors = std::move(attractors);
    m.integration.dt = 0.1;
    m.integration.steps = 37;
    m.integration.sigma = 0.05;
    m.train_seed = 4242;
    return m;
}

} // namespace

TEST_CASE("checkpoint round-trip is bit-exact, including the assembled coupling") {
    const Model model = make_model(501);
    const std::string path = testutil::temp_path("model.ckpt");
    save_checkpoint(path, model, "unit test");

    CheckpointMeta meta;
    const Model back = load_checkpoint(path, &meta);
    CHECK(meta.created_by == "unit test");
    CHECK(back.coupling.n == model.coupling.n);
    CHECK(back.coupling.k == model.coupling.k);
    CHECK(back.coupling.eigvecs.data == model.coupling.eigvecs.data);
    CHECK(back.coupling.eigvals == model.coupling.eigvals);
    CHECK(back.coupling.frozen_cols == model.coupling.frozen_cols);
    CHECK(back.coupling.planted_eigenvalue == model.coupling.planted_eigenvalue);
    CHECK(back.coupling.hill_c == model.coupling.hill_c);
    CHECK(back.coupling.beta == model.coupling.beta);
    CHECK(back.integration.dt == model.integration.dt);
    CHECK(back.integration.steps == model.integration.steps);
    CHECK(back.integration.sigma == model.integration.sigma);
    CHECK(back.train_seed == model.train_seed);
    // Attractors are reconstructed from the stored patterns, bit for bit.
    REQUIRE(back.attractors.patterns.size() == model.attractors.patterns.size());
    for (std::size_t k = 0; k < model.attractors.patterns.size(); ++k) {
        CHECK(back.attractors.patterns[k] == model.attractors.patterns[k]);
        CHECK(back.attractors.states[k] == model.attractors.states[k]);
        CHECK(back.attractors.images[k] == model.attractors.images[k]);
    }
    // Assembled coupling differs by 0 ULPs.
    const Matrix a = assemble(model.coupling);
    const Matrix b = assemble(back.coupling);
    CHECK(a.data == b.data);
}

TEST_CASE("saving twice produces byte-identical files") {
    const Model model = make_model(503);
    const std::string p1 = testutil::temp_path("ckpt1");
    const std::string p2 = testutil::temp_path("ckpt2");
    save_checkpoint(p1, model, "cvfr train --seed 1");
    save_checkpoint(p2, model, "cvfr train --seed 1");
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("version and structure validation") {
    const Model model = make_model(505);
    const std::string path = testutil::temp_path("ckpt_bad");
    save_checkpoint(path, model, "x");

    SUBCASE("unsupported version") {
        std::string contents = slurp(path);
        contents.replace(contents.find("cvfr-checkpoint 1"), 17, "cvfr-checkpoint 9");
        std::ofstream out(path, std::ios::binary);
        out << contents;
        out.close();
        CHECK_THROWS_AS(load_checkpoint(path), Error);
    }
    SUBCASE("truncated payload") {
        std::string contents = slurp(path);
        contents.resize(contents.size() - 8);
        std::ofstream out(path, std::ios::binary);
        out << contents;
        out.close();
        CHECK_THROWS_AS(load_checkpoint(path), Error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_checkpoint("/nonexistent/path.ckpt"), Error);
    }
}

TEST_CASE("distinct-eigenvalue models refuse to checkpoint") {
    Model model = make_model(507);
    const double beta = model.coupling.beta;
    model.attractors = make_attractors(
        model.attractors.patterns,
        std::vector<Alphabet>{solve_alphabet(4.0 / beta, 1.0, beta), solve_alphabet(4.5 / beta, 1.0, beta)});
    CHECK_THROWS_AS(save_checkpoint(testutil::temp_path("nondegen"), model, "x"), Error);
}
