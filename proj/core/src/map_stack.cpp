#include "dalab/map_stack.hpp"

#include <cmath>

#include "dalab/errors.hpp"

namespace dalab {

namespace {

double bump_phi(double v) { return v <= 0 ? 0.0 : std::exp(-1.0 / v); }
double bump_phi_d(double v) { return v <= 0 ? 0.0 : bump_phi(v) / (v * v); }
double bump_phi_d2(double v) {
  return v <= 0 ? 0.0 : bump_phi(v) * (1 - 2 * v) / (v * v * v * v);
}

} // namespace

void SmoothStep::eval(double t, double& v, double& d1, double& d2) const {
  if (t <= lo) {
    v = 1;
    d1 = d2 = 0;
    return;
  }
  if (t >= hi) {
    v = d1 = d2 = 0;
    return;
  }
  double du = 1.0 / (hi - lo);
  double u = (t - lo) * du;
  double a = bump_phi(1 - u), b = bump_phi(u);
  double da = -bump_phi_d(1 - u), db = bump_phi_d(u); // d/du
  double d2a = bump_phi_d2(1 - u), d2b = bump_phi_d2(u);
  double S = a + b, Sp = da + db, Spp = d2a + d2b;
  v = a / S;
  double num = da * S - a * Sp;
  d1 = num / (S * S) * du;
  double nump = d2a * S - a * Spp;
  d2 = ((nump * S - 2 * num * Sp) / (S * S * S)) * du * du;
}

// ---------------------------------------------------------------------------
// TwistLayer

Vec3 TwistLayer::apply(const Vec3& x, int dir) const {
  double w1 = wrap_half(x[axis_u] - center_u);
  double w2 = wrap_half(x[axis_c] - center_c);
  double z1 = w1 / aspect, z2 = w2 * aspect;
  double rho2 = z1 * z1 + z2 * z2;
  if (rho2 >= radius * radius) return x;
  SmoothStep prof{plateau * radius, radius};
  double rho = std::sqrt(rho2);
  double p, dp, d2p;
  prof.eval(rho, p, dp, d2p);
  double th = dir * angle * p;
  double c = std::cos(th), s = std::sin(th);
  Vec3 y = x;
  y[axis_u] += aspect * ((c - 1) * z1 - s * z2);
  y[axis_c] += (s * z1 + (c - 1) * z2) / aspect;
  return y;
}

Vec3 TwistLayer::apply_with_jacobian(const Vec3& x, int dir, Mat3& J) const {
  J = Mat3::identity();
  double w1 = wrap_half(x[axis_u] - center_u);
  double w2 = wrap_half(x[axis_c] - center_c);
  double z1 = w1 / aspect, z2 = w2 * aspect;
  double rho2 = z1 * z1 + z2 * z2;
  if (rho2 >= radius * radius) return x;
  SmoothStep prof{plateau * radius, radius};
  double rho = std::sqrt(rho2);
  double p, dp, d2p;
  prof.eval(rho, p, dp, d2p);
  double th = dir * angle * p;
  double dth = dir * angle * dp; // d theta / d rho
  double c = std::cos(th), s = std::sin(th);
  // dz'/dz = R(th) + R'(th) z (grad_z th)^T with grad_z th = dth * z/rho
  double g1 = rho > 0 ? dth * z1 / rho : 0.0;
  double g2 = rho > 0 ? dth * z2 / rho : 0.0;
  double J11 = c + (-s * z1 - c * z2) * g1;
  double J12 = (-s * z1 - c * z2) * g2 - s;
  double J21 = s + (c * z1 - s * z2) * g1;
  double J22 = (c * z1 - s * z2) * g2 + c;
  // conjugate by D = diag(mu, 1/mu)
  J.m[axis_u][axis_u] = J11;
  J.m[axis_u][axis_c] = J12 * aspect * aspect;
  J.m[axis_c][axis_u] = J21 / (aspect * aspect);
  J.m[axis_c][axis_c] = J22;
  Vec3 y = x;
  y[axis_u] += aspect * ((c - 1) * z1 - s * z2);
  y[axis_c] += (s * z1 + (c - 1) * z2) / aspect;
  return y;
}

nlohmann::json TwistLayer::to_json() const {
  return {{"type", "twist"},     {"axis_u", axis_u},   {"axis_c", axis_c},
          {"center_u", center_u}, {"center_c", center_c}, {"radius", radius},
          {"aspect", aspect},    {"angle", angle},     {"plateau", plateau}};
}

TwistLayer TwistLayer::from_json(const nlohmann::json& j) {
  TwistLayer t;
  t.axis_u = j.at("axis_u");
  t.axis_c = j.at("axis_c");
  t.center_u = j.at("center_u");
  t.center_c = j.at("center_c");
  t.radius = j.at("radius");
  t.aspect = j.at("aspect");
  t.angle = j.at("angle");
  t.plateau = j.at("plateau");
  return t;
}

// ---------------------------------------------------------------------------
// SqueezeLayer

void SqueezeLayer::finalize() {
  // per-step Cayley factor (1 + h/2)/(1 - h/2) must equal kappa^(1/steps)
  double m = std::pow(kappa, 1.0 / steps);
  h_ = 2 * (m - 1) / (m + 1);
}

Vec3 SqueezeLayer::field(const Vec3& xi, Mat3* DX) const {
  // H = -xi_c xi_s chi(q), q = |P xi|^2 / r^2; X = (0, dH/dxi_s, -dH/dxi_c)
  Vec3 w = basis * xi;
  double q = dot(w, w) / (radius * radius);
  SmoothStep cut{0.25, 1.0};
  double C, C1, C2;
  cut.eval(q, C, C1, C2);
  if (DX) *DX = Mat3{};
  if (C == 0 && C1 == 0) return {0, 0, 0};
  // grad_xi q = 2 P^T w / r^2
  Mat3 Pt = basis.transposed();
  Vec3 gq = (2.0 / (radius * radius)) * (Pt * w);
  double xc = xi[1], xs = xi[2];
  Vec3 dH = {-xc * xs * C1 * gq[0], -xs * C - xc * xs * C1 * gq[1],
             -xc * C - xc * xs * C1 * gq[2]};
  Vec3 X = {0, dH[2], -dH[1]};
  if (DX) {
    Mat3 Hh{};
    Hh.m[1][2] -= C;
    Hh.m[2][1] -= C;
    Vec3 v = {0, xs, xc};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) Hh.m[i][j] += -v[i] * C1 * gq[j] - C1 * gq[i] * v[j];
    Mat3 G = Pt * basis;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        Hh.m[i][j] += -xc * xs * (C2 * gq[i] * gq[j] + C1 * 2 * G.m[i][j] / (radius * radius));
    Mat3 D{};
    for (int j = 0; j < 3; ++j) {
      D.m[1][j] = Hh.m[2][j];  // row c of X is row s of Hess
      D.m[2][j] = -Hh.m[1][j]; // row s of X is -row c of Hess
    }
    *DX = D;
  }
  return X;
}

Vec3 SqueezeLayer::run(const Vec3& x, int dir, Mat3* J) const {
  if (J) *J = Mat3::identity();
  if (kappa == 1.0 || h_ == 0.0) return x;
  Vec3 w = wrap_half(x - fixed_point);
  if (dot(w, w) >= radius * radius) return x;
  Vec3 xi = basis_inverse * w;
  double hh = dir * h_;
  Mat3 acc = Mat3::identity();
  for (int s = 0; s < steps; ++s) {
    Vec3 y = xi;
    for (int it = 0; it < 10; ++it) {
      Vec3 mid = 0.5 * (xi + y);
      y = xi + hh * field(mid, nullptr);
    }
    if (J) {
      Vec3 mid = 0.5 * (xi + y);
      Mat3 DX;
      field(mid, &DX);
      Mat3 Am = Mat3::identity(), Bm = Mat3::identity();
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          Am.m[i][j] -= 0.5 * hh * DX.m[i][j];
          Bm.m[i][j] += 0.5 * hh * DX.m[i][j];
        }
      acc = Am.inverse() * Bm * acc;
    }
    xi = y;
  }
  if (J) *J = basis * acc * basis_inverse;
  Vec3 wn = basis * xi;
  return x + (wn - w);
}

Vec3 SqueezeLayer::apply(const Vec3& x, int dir) const { return run(x, dir, nullptr); }

Vec3 SqueezeLayer::apply_with_jacobian(const Vec3& x, int dir, Mat3& J) const {
  return run(x, dir, &J);
}

nlohmann::json SqueezeLayer::to_json() const {
  nlohmann::json b = nlohmann::json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b.push_back(basis.m[i][j]);
  return {{"type", "squeeze"},
          {"fixed_point", {fixed_point[0], fixed_point[1], fixed_point[2]}},
          {"radius", radius},
          {"kappa", kappa},
          {"steps", steps},
          {"basis", b}};
}

SqueezeLayer SqueezeLayer::from_json(const nlohmann::json& j) {
  SqueezeLayer s;
  auto fp = j.at("fixed_point");
  s.fixed_point = {fp[0], fp[1], fp[2]};
  s.radius = j.at("radius");
  s.kappa = j.at("kappa");
  s.steps = j.at("steps");
  auto b = j.at("basis");
  for (int i = 0; i < 3; ++i)
    for (int jj = 0; jj < 3; ++jj) s.basis.m[i][jj] = b[3 * i + jj];
  s.basis_inverse = s.basis.inverse();
  s.finalize();
  return s;
}

// ---------------------------------------------------------------------------
// MapStack

MapStack MapStack::from_linear(const IntegerMatrix3& A) {
  MapStack s;
  s.linear_int = A;
  s.linear = A.to_real();
  int64_t d = A.det();
  if (d != 1 && d != -1) fail(Errc::precondition, "MapStack: linear part must be unimodular");
  IntegerMatrix3 adj = A.adjugate();
  Mat3 inv = adj.to_real();
  if (d == -1)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) inv.m[i][j] = -inv.m[i][j];
  s.linear_inverse = inv;
  return s;
}

Vec3 MapStack::lift(const Vec3& x) const {
  Vec3 y = x;
  for (const auto& l : layers)
    y = std::visit([&](const auto& lay) { return lay.apply(y, +1); }, l);
  return linear * y;
}

Vec3 MapStack::lift_inverse(const Vec3& y) const {
  Vec3 x = linear_inverse * y;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it)
    x = std::visit([&](const auto& lay) { return lay.apply(x, -1); }, *it);
  return x;
}

Mat3 MapStack::derivative(const Vec3& x) const {
  Vec3 y = x;
  Mat3 J = Mat3::identity();
  for (const auto& l : layers) {
    Mat3 Jl;
    y = std::visit([&](const auto& lay) { return lay.apply_with_jacobian(y, +1, Jl); }, l);
    J = Jl * J;
  }
  return linear * J;
}

nlohmann::json MapStack::to_json() const {
  nlohmann::json lin = nlohmann::json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) lin.push_back(linear_int.m[i][j]);
  nlohmann::json ls = nlohmann::json::array();
  for (const auto& l : layers)
    ls.push_back(std::visit([](const auto& lay) { return lay.to_json(); }, l));
  return {{"linear", lin},
          {"family_index", linear_int.family_index},
          {"tag", static_cast<int>(linear_int.tag)},
          {"layers", ls}};
}

MapStack MapStack::from_json(const nlohmann::json& j) {
  IntegerMatrix3 A;
  auto lin = j.at("linear");
  for (int i = 0; i < 3; ++i)
    for (int jj = 0; jj < 3; ++jj) A.m[i][jj] = lin[3 * i + jj].get<int64_t>();
  A.family_index = j.value("family_index", int64_t{0});
  A.tag = static_cast<IntegerMatrix3::Tag>(j.value("tag", 2));
  MapStack s = MapStack::from_linear(A);
  for (const auto& lj : j.at("layers")) {
    std::string type = lj.at("type");
    if (type == "twist")
      s.layers.emplace_back(TwistLayer::from_json(lj));
    else if (type == "squeeze")
      s.layers.emplace_back(SqueezeLayer::from_json(lj));
    else
      fail(Errc::config, "MapStack: unknown layer type '" + type + "'");
  }
  return s;
}

} // namespace dalab
