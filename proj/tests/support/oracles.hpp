#pragma once

// Independent reference computations. Nothing here calls into the library's
// numerical code; formulas are written out directly.

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace oracle {

inline long double sigmoid(long double x) { return 1.0L / (1.0L + std::exp(-x)); }

inline long double kl(const std::vector<double>& p, const std::vector<double>& q) {
  long double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) s += static_cast<long double>(p[i]) * std::log(static_cast<long double>(p[i]) / q[i]);
  return s;
}

inline std::vector<double> normalize_exp(const std::vector<double>& logits) {
  long double z = 0;
  for (double l : logits) z += std::exp(static_cast<long double>(l));
  std::vector<double> out;
  for (double l : logits) out.push_back(static_cast<double>(std::exp(static_cast<long double>(l)) / z));
  return out;
}

/// base * exp(r / beta), normalized, in long double without max shifting.
inline std::vector<double> gibbs(const std::vector<double>& base, const std::vector<double>& r, double beta) {
  std::vector<long double> w(base.size());
  long double z = 0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    w[i] = base[i] * std::exp(static_cast<long double>(r[i]) / beta);
    z += w[i];
  }
  std::vector<double> out;
  for (auto v : w) out.push_back(static_cast<double>(v / z));
  return out;
}

/// E_pi[r] - beta KL(pi || base) for one prompt.
inline long double objective(const std::vector<double>& pi, const std::vector<double>& base,
                             const std::vector<double>& r, double beta) {
  long double s = 0;
  for (std::size_t i = 0; i < pi.size(); ++i) s += static_cast<long double>(pi[i]) * r[i];
  return s - beta * kl(pi, base);
}

inline long double tv(const std::vector<double>& p, const std::vector<double>& q) {
  long double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(static_cast<long double>(p[i]) - q[i]);
  return s / 2;
}

/// Central differences of f at x, one coordinate at a time.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(max_i |b_i|, floor).
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-6) {
  double num = 0, den = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::fabs(a[i] - b[i]));
    den = std::max(den, std::fabs(b[i]));
  }
  return num / den;
}

/// BM25 from raw token lists: tf, df, lengths and avg length are recounted
/// here by scanning every document.
inline double bm25(const std::vector<std::vector<std::string>>& docs, const std::vector<std::string>& query,
                   std::size_t doc, double k1 = 1.2, double b = 0.75) {
  const double n_docs = static_cast<double>(docs.size());
  double total_len = 0;
  for (const auto& d : docs) total_len += static_cast<double>(d.size());
  const double avg = total_len / n_docs;
  double score = 0;
  for (const auto& term : query) {
    double df = 0;
    for (const auto& d : docs) {
      for (const auto& t : d)
        if (t == term) {
          df += 1;
          break;
        }
    }
    double tf = 0;
    for (const auto& t : docs[doc])
      if (t == term) tf += 1;
    if (tf == 0) continue;
    const double idf = std::log(1 + (n_docs - df + 0.5) / (df + 0.5));
    const double dl = static_cast<double>(docs[doc].size());
    score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avg));
  }
  return score;
}

}  // namespace oracle
