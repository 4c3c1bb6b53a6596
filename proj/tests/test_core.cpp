#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>

#include "interlab/errors.hpp"
#include "interlab/parallel.hpp"
#include "interlab/random.hpp"
#include "interlab/tensor.hpp"

using namespace interlab;

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.data.size() == 6);
    t.data[5] = 1.5;
    CHECK(t[5] == 1.5);

    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    CHECK_THROWS_AS(add(Tensor::zeros(3), Tensor::zeros(4)), ShapeError);
}

TEST_CASE("tensor norms") {
    Tensor a = Tensor::flat({3.0, -4.0});
    CHECK(l2_norm(a) == doctest::Approx(5.0));
    CHECK(linf_norm(a) == doctest::Approx(4.0));
    CHECK(lp_norm(a, 1.0) == doctest::Approx(7.0));
    // p=5 norm of (3,4): (3^5 + 4^5)^(1/5)
    CHECK(lp_norm(a, 5.0) == doctest::Approx(std::pow(243.0 + 1024.0, 0.2)));

    Tensor r = rescale_to_l2(a, 1.0);
    CHECK(l2_norm(r) == doctest::Approx(1.0));
    CHECK(r[0] == doctest::Approx(0.6));

    Tensor z = Tensor::zeros(4);
    Tensor rz = rescale_to_l2(z, 3.0);
    CHECK(l2_norm(rz) == 0.0);
}

TEST_CASE("random stream is deterministic and seed-sensitive") {
    RandomStream a(42), b(42), c(43);
    bool all_equal = true;
    bool any_diff = false;
    for (int i = 0; i < 100; ++i) {
        double va = a.uniform();
        double vb = b.uniform();
        double vc = c.uniform();
        all_equal = all_equal && (va == vb);
        any_diff = any_diff || (va != vc);
        CHECK(va >= 0.0);
        CHECK(va < 1.0);
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("normal draws have sane moments") {
    RandomStream rng(7);
    double sum = 0.0, sumsq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double v = rng.normal();
        sum += v;
        sumsq += v * v;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.03);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("uniform_int stays in range and covers values") {
    RandomStream rng(11);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        std::uint64_t v = rng.uniform_int(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
    CHECK_THROWS_AS(rng.uniform_int(0), ConfigError);
}

TEST_CASE("sample_without_replacement yields distinct indices") {
    RandomStream rng(3);
    auto s = rng.sample_without_replacement(10, 6);
    CHECK(s.size() == 6);
    std::set<std::size_t> uniq(s.begin(), s.end());
    CHECK(uniq.size() == 6);
    for (std::size_t v : s) CHECK(v < 10);
    CHECK_THROWS_AS(rng.sample_without_replacement(3, 4), ConfigError);
}

TEST_CASE("derived seeds differ by tag and index") {
    auto s1 = derive_seed(99, 1);
    auto s2 = derive_seed(99, 2);
    auto s3 = derive_seed(99, 1, 0);
    auto s4 = derive_seed(99, 1, 1);
    CHECK(s1 != s2);
    CHECK(s3 != s4);
    CHECK(derive_seed(99, 1) == s1);
}

TEST_CASE("parallel_for covers every index once for any worker count") {
    for (int jobs : {1, 2, 4, 7}) {
        std::vector<std::atomic<int>> hits(100);
        for (auto& h : hits) h = 0;
        parallel_for(100, jobs, [&](std::size_t i) { hits[i]++; });
        for (auto& h : hits) CHECK(h == 1);
    }
}

TEST_CASE("parallel_for propagates worker exceptions") {
    CHECK_THROWS_AS(parallel_for(50, 4,
                                 [&](std::size_t i) {
                                     if (i == 13) throw ConfigError("boom");
                                 }),
                    ConfigError);
}
