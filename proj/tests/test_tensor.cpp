#include "fnrgnn/tensor.hpp"
#include "support/gen.hpp"

#include <doctest.h>

#include <cmath>

using namespace fnr;
using fnr::testing::Gen;

namespace {

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

void check_close(const Tensor& a, const Tensor& b, double tol) {
  REQUIRE(a.same_shape(b));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - b[i]) <= tol);
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("matmul by hand") {
    const Tensor a(2, 2, {1, 2, 3, 4});
    const Tensor b(2, 1, {1, 1});
    CHECK(matmul(a, b) == Tensor(2, 1, {3, 7}));
  }

  TEST_CASE("matmul variants match the triple loop") {
    for (std::size_t k = 0; k < 20; ++k) {
      Gen gen(testing::case_seed(21, k));
      const std::size_t m = gen.index(1, 9), n = gen.index(1, 9), p = gen.index(1, 9);
      const Tensor a = gen.tensor(m, n);
      const Tensor b = gen.tensor(n, p);
      check_close(matmul(a, b), naive_matmul(a, b), 1e-12);
      check_close(matmul_tn(transpose(a), b), naive_matmul(a, b), 1e-12);
      check_close(matmul_nt(a, transpose(b)), naive_matmul(a, b), 1e-12);
      CHECK(transpose(transpose(a)) == a);
    }
  }

  TEST_CASE("shape errors name both shapes") {
    const Tensor a(2, 3), b(2, 3), c(4, 1);
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("(2, 3)"), std::invalid_argument);
    try {
      require_same_shape(a, c, "add");
      FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      CHECK(msg.find("(2, 3)") != std::string::npos);
      CHECK(msg.find("(4, 1)") != std::string::npos);
    }
  }

  TEST_CASE("csr sums duplicates and keeps entries sorted") {
    const CsrMatrix m(3, 3, {{2, 0, 1.0}, {0, 1, 2.0}, {0, 1, 0.5}, {1, 1, 3.0}});
    CHECK(m.nnz() == 3);
    CHECK(m.at(0, 1) == 2.5);
    CHECK(std::isnan(m.at(0, 0)));
    const auto e = m.entries();
    CHECK(e[0].row == 0);
    CHECK(e[1].row == 1);
    CHECK(e[2].row == 2);
    CHECK_THROWS_AS(CsrMatrix(2, 2, {{2, 0, 1.0}}), std::out_of_range);
  }

  TEST_CASE("identity spmm leaves input unchanged") {
    Gen gen(3);
    const Tensor x = gen.tensor(6, 3);
    CHECK(spmm(CsrMatrix::identity(6), x) == x);
  }

  TEST_CASE("spmm matches the dense product") {
    for (std::size_t k = 0; k < 20; ++k) {
      Gen gen(testing::case_seed(22, k));
      const std::size_t n = gen.index(1, 12), c = gen.index(1, 5);
      std::vector<CsrMatrix::Entry> entries;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (gen.coin(0.3)) entries.push_back({i, j, gen.normal()});
      const CsrMatrix a(n, n, entries);
      const Tensor x = gen.tensor(n, c);
      check_close(spmm(a, x), naive_matmul(a.to_dense(), x), 1e-12);
      check_close(spmm_transposed(a, x), naive_matmul(transpose(a.to_dense()), x), 1e-12);
    }
  }
}
