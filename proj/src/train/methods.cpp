#include <algorithm>
#include <sstream>

#include "svft/adapter.hpp"
#include "svft/baselines.hpp"
#include "svft/errors.hpp"
#include "svft/train.hpp"

namespace svft::train {

namespace b = svft::baselines;

std::string MethodSpec::family() const {
  switch (kind) {
    case MethodKind::SvftPlain: return "svft-p";
    case MethodKind::SvftBanded: return "svft-b";
    case MethodKind::SvftRandom: return "svft-r";
    case MethodKind::SvftTopK: return "svft-t";
    case MethodKind::LoRA: return "lora";
    case MethodKind::VeRA: return "vera";
    case MethodKind::DoRA: return "dora";
    case MethodKind::FullFT: return "full";
  }
  return "unknown";
}

std::string MethodSpec::variant() const {
  std::ostringstream out;
  switch (kind) {
    case MethodKind::SvftPlain: out << "diag"; break;
    case MethodKind::SvftBanded: out << "d=" << param; break;
    case MethodKind::SvftRandom: out << "total=" << param << ",seed=" << seed; break;
    case MethodKind::SvftTopK: out << "k=" << param; break;
    case MethodKind::LoRA:
    case MethodKind::DoRA: out << "r=" << param; break;
    case MethodKind::VeRA: out << "r=" << param << ",seed=" << seed; break;
    case MethodKind::FullFT: out << "all"; break;
  }
  if (rank > 0) out << ",rank=" << rank << (truncate_base ? ",base-truncated" : "");
  return out.str();
}

std::string MethodSpec::to_string() const {
  std::ostringstream out;
  out << family();
  switch (kind) {
    case MethodKind::SvftBanded:
    case MethodKind::SvftTopK:
    case MethodKind::LoRA:
    case MethodKind::DoRA: out << ':' << param; break;
    case MethodKind::SvftRandom:
    case MethodKind::VeRA: out << ':' << param << ':' << seed; break;
    default: break;
  }
  if (rank > 0) out << '@' << rank << (truncate_base ? "!" : "");
  return out.str();
}

namespace {

std::size_t parse_count(const std::string& s, const std::string& text) {
  try {
    std::size_t used = 0;
    if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ValueError("bad number '" + s + "' in method '" + text + "'");
  }
}

std::size_t band_count(std::size_t d1, std::size_t d2, std::size_t band) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < d1; ++i) {
    if (i >= d2 + band) continue;
    const std::size_t lo = i > band ? i - band : 0;
    const std::size_t hi = std::min(d2 - 1, i + band);
    n += hi - lo + 1;
  }
  return n;
}

}  // namespace

MethodSpec parse_method(const std::string& text) {
  std::string body = text;
  MethodSpec m;
  if (const auto at = body.find('@'); at != std::string::npos) {
    std::string r = body.substr(at + 1);
    body = body.substr(0, at);
    if (!r.empty() && r.back() == '!') {
      m.truncate_base = true;
      r.pop_back();
    }
    m.rank = parse_count(r, text);
    if (m.rank == 0) throw ValueError("truncation rank must be positive in '" + text + "'");
  }
  std::vector<std::string> parts;
  {
    std::istringstream in(body);
    std::string p;
    while (std::getline(in, p, ':')) parts.push_back(p);
  }
  if (parts.empty()) throw ValueError("empty method");
  const std::string& fam = parts[0];
  const auto arity = [&](std::size_t lo, std::size_t hi) {
    if (parts.size() < lo + 1 || parts.size() > hi + 1)
      throw ValueError("wrong number of fields in method '" + text + "'");
  };
  if (fam == "svft-p") {
    arity(0, 0);
    m.kind = MethodKind::SvftPlain;
  } else if (fam == "svft-b") {
    arity(1, 1);
    m.kind = MethodKind::SvftBanded;
    m.param = parse_count(parts[1], text);
  } else if (fam == "svft-r") {
    arity(1, 2);
    m.kind = MethodKind::SvftRandom;
    m.param = parse_count(parts[1], text);
    if (parts.size() == 3) m.seed = parse_count(parts[2], text);
  } else if (fam == "svft-t") {
    arity(1, 1);
    m.kind = MethodKind::SvftTopK;
    m.param = parse_count(parts[1], text);
  } else if (fam == "lora" || fam == "dora") {
    arity(1, 1);
    m.kind = fam == "lora" ? MethodKind::LoRA : MethodKind::DoRA;
    m.param = parse_count(parts[1], text);
  } else if (fam == "vera") {
    arity(1, 2);
    m.kind = MethodKind::VeRA;
    m.param = parse_count(parts[1], text);
    if (parts.size() == 3) m.seed = parse_count(parts[2], text);
  } else if (fam == "full") {
    arity(0, 0);
    m.kind = MethodKind::FullFT;
  } else {
    throw ValueError("unknown method '" + text + "'");
  }
  const bool needs_positive = m.kind == MethodKind::SvftTopK || m.kind == MethodKind::LoRA ||
                              m.kind == MethodKind::DoRA || m.kind == MethodKind::VeRA;
  if (needs_positive && m.param == 0) throw ValueError("method '" + text + "' needs a count of at least 1");
  if (m.rank > 0 && m.kind != MethodKind::SvftPlain && m.kind != MethodKind::SvftBanded)
    throw ValueError("truncation is only supported for svft-p and svft-b");
  return m;
}

std::size_t trainable_count(const MethodSpec& m, std::size_t d1, std::size_t d2) {
  const std::size_t full_rank = std::min(d1, d2);
  if (m.rank > full_rank) throw ValueError("truncation rank exceeds min(d1, d2)");
  const std::size_t r_eff = m.rank == 0 ? full_rank : m.rank;
  const bool truncated = r_eff < full_rank;
  switch (m.kind) {
    case MethodKind::SvftPlain: return r_eff;
    case MethodKind::SvftBanded:
      if (truncated) return m.param < r_eff ? banded_count(r_eff, m.param) : r_eff * r_eff;
      if (d1 == d2 && m.param < d1) return b::param_count(b::CountMethod::SvftBanded, 1, d1, m.param);
      return band_count(d1, d2, m.param);
    case MethodKind::SvftRandom:
    case MethodKind::SvftTopK: return m.param;
    case MethodKind::LoRA: return m.param * (d1 + d2);
    case MethodKind::DoRA: return d2 + m.param * (d1 + d2);
    case MethodKind::VeRA: return d1 + m.param;
    case MethodKind::FullFT: return d1 * d2;
  }
  throw ValueError("unknown method");
}

// ---------------------------------------------------------------------------
// Trainable views

namespace {

void copy_into(std::span<const double> src, std::vector<double>& dst) {
  dst.insert(dst.end(), src.begin(), src.end());
}

void require_size(std::span<const double> p, std::size_t n) {
  if (p.size() != n) throw ShapeError("parameter vector has the wrong length");
}

class SvftTrainable final : public Trainable {
 public:
  explicit SvftTrainable(SvftAdapter adapter)
      : adapter_(std::move(adapter)),
        base_(adapter_.factors().reconstruct(adapter_.base_rank())) {}

  Matrix weight() const override { return base_ + delta_w(adapter_); }
  std::size_t size() const override { return adapter_.num_trainable(); }
  std::vector<double> parameters() const override {
    return {adapter_.values().begin(), adapter_.values().end()};
  }
  void set_parameters(std::span<const double> p) override {
    require_size(p, size());
    std::copy(p.begin(), p.end(), adapter_.values().begin());
  }
  std::vector<double> gradient(const Matrix& upstream) const override {
    return grad_values(adapter_, upstream);
  }

 private:
  SvftAdapter adapter_;
  Matrix base_;
};

class LoraTrainable final : public Trainable {
 public:
  LoraTrainable(Matrix base, b::LoraAdapter ad) : base_(std::move(base)), ad_(std::move(ad)) {}

  Matrix weight() const override { return base_ + b::lora_delta(ad_); }
  std::size_t size() const override { return ad_.num_trainable(); }
  std::vector<double> parameters() const override {
    std::vector<double> p;
    p.reserve(size());
    copy_into(ad_.a.data(), p);
    copy_into(ad_.b.data(), p);
    return p;
  }
  void set_parameters(std::span<const double> p) override {
    require_size(p, size());
    const std::size_t na = ad_.a.size();
    std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(na), ad_.a.data().begin());
    std::copy(p.begin() + static_cast<std::ptrdiff_t>(na), p.end(), ad_.b.data().begin());
  }
  std::vector<double> gradient(const Matrix& upstream) const override {
    const b::LoraGrad g = b::lora_grad(ad_, upstream);
    std::vector<double> out;
    out.reserve(size());
    copy_into(g.a.data(), out);
    copy_into(g.b.data(), out);
    return out;
  }

 private:
  Matrix base_;
  b::LoraAdapter ad_;
};

class VeraTrainable final : public Trainable {
 public:
  VeraTrainable(Matrix base, b::VeraAdapter ad) : base_(std::move(base)), ad_(std::move(ad)) {}

  Matrix weight() const override { return base_ + b::vera_delta(ad_); }
  std::size_t size() const override { return ad_.num_trainable(); }
  std::vector<double> parameters() const override {
    std::vector<double> p = ad_.lambda_d;
    copy_into(ad_.lambda_b, p);
    return p;
  }
  void set_parameters(std::span<const double> p) override {
    require_size(p, size());
    const std::size_t r = ad_.lambda_d.size();
    std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(r), ad_.lambda_d.begin());
    std::copy(p.begin() + static_cast<std::ptrdiff_t>(r), p.end(), ad_.lambda_b.begin());
  }
  std::vector<double> gradient(const Matrix& upstream) const override {
    b::VeraGrad g = b::vera_grad(ad_, upstream);
    copy_into(g.lambda_b, g.lambda_d);
    return g.lambda_d;
  }

 private:
  Matrix base_;
  b::VeraAdapter ad_;
};

class DoraTrainable final : public Trainable {
 public:
  DoraTrainable(Matrix base, b::DoraAdapter ad) : base_(std::move(base)), ad_(std::move(ad)) {}

  Matrix weight() const override { return b::dora_weight(base_, ad_); }
  std::size_t size() const override { return ad_.num_trainable(); }
  std::vector<double> parameters() const override {
    std::vector<double> p = ad_.magnitude;
    copy_into(ad_.lora.a.data(), p);
    copy_into(ad_.lora.b.data(), p);
    return p;
  }
  void set_parameters(std::span<const double> p) override {
    require_size(p, size());
    auto it = p.begin();
    const auto take = [&](std::span<double> dst) {
      std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
      it += static_cast<std::ptrdiff_t>(dst.size());
    };
    take(ad_.magnitude);
    take(ad_.lora.a.data());
    take(ad_.lora.b.data());
  }
  std::vector<double> gradient(const Matrix& upstream) const override {
    b::DoraGrad g = b::dora_grad(base_, ad_, upstream);
    std::vector<double> out = std::move(g.magnitude);
    copy_into(g.lora.a.data(), out);
    copy_into(g.lora.b.data(), out);
    return out;
  }

 private:
  Matrix base_;
  b::DoraAdapter ad_;
};

class FullTrainable final : public Trainable {
 public:
  explicit FullTrainable(Matrix w) : w_(std::move(w)) {}

  Matrix weight() const override { return w_; }
  std::size_t size() const override { return w_.size(); }
  std::vector<double> parameters() const override { return {w_.data().begin(), w_.data().end()}; }
  void set_parameters(std::span<const double> p) override {
    require_size(p, size());
    std::copy(p.begin(), p.end(), w_.data().begin());
  }
  std::vector<double> gradient(const Matrix& upstream) const override {
    return {upstream.data().begin(), upstream.data().end()};
  }

 private:
  Matrix w_;
};

}  // namespace

std::unique_ptr<Trainable> make_trainable(const MethodSpec& m, const Matrix& base,
                                          std::shared_ptr<const SvdFactors> factors,
                                          std::uint64_t seed) {
  const std::size_t d1 = base.rows();
  const std::size_t d2 = base.cols();
  switch (m.kind) {
    case MethodKind::SvftPlain:
    case MethodKind::SvftBanded:
    case MethodKind::SvftRandom:
    case MethodKind::SvftTopK: {
      if (!factors) factors = std::make_shared<const SvdFactors>(svd(base));
      SparsityPattern pattern = [&] {
        switch (m.kind) {
          case MethodKind::SvftPlain: return plain(d1, d2);
          case MethodKind::SvftBanded: return banded(d1, d2, m.param);
          case MethodKind::SvftRandom: return random_pattern(d1, d2, m.param, m.seed);
          default: return top_k(*factors, m.param);
        }
      }();
      SvftAdapter ad = SvftAdapter::init(factors, std::move(pattern));
      if (m.rank > 0 && m.rank < ad.factors().rank_capacity())
        ad = truncate(ad, m.rank, m.truncate_base);
      return std::make_unique<SvftTrainable>(std::move(ad));
    }
    case MethodKind::LoRA:
      return std::make_unique<LoraTrainable>(base, b::LoraAdapter::init(d1, d2, m.param, seed));
    case MethodKind::VeRA:
      return std::make_unique<VeraTrainable>(base, b::VeraAdapter::init(d1, d2, m.param, m.seed));
    case MethodKind::DoRA:
      return std::make_unique<DoraTrainable>(base, b::DoraAdapter::init(base, m.param, seed));
    case MethodKind::FullFT:
      return std::make_unique<FullTrainable>(base);
  }
  throw ValueError("unknown method");
}

}  // namespace svft::train
