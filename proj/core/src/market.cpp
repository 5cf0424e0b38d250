#include "evmarket/market.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "evmarket/rng.hpp"

namespace evmarket::market {

void SgpTypeModel::validate() const {
    if (phi_min < 1 || phi_max < phi_min) {
        throw std::invalid_argument("type model: bad type range");
    }
    if (static_cast<int>(probs.size()) != type_count()) {
        throw std::invalid_argument("type model: probs size mismatch");
    }
    double sum = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw std::invalid_argument("type model: negative probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("type model: probabilities must sum to 1");
    }
    if (s_max < 0.0) throw std::invalid_argument("type model: negative capacity");
    if (zeta <= 0.0) throw std::invalid_argument("type model: zeta must be positive");
    if (true_type < phi_min || true_type > phi_max) {
        throw std::invalid_argument("type model: true type outside range");
    }
}

SgpTypeModel SgpTypeModel::uniform(int phi_max, double s_max, double zeta,
                                   int true_type) {
    SgpTypeModel m;
    m.phi_min = 1;
    m.phi_max = phi_max;
    m.probs.assign(static_cast<std::size_t>(phi_max),
                   1.0 / static_cast<double>(phi_max));
    m.s_max = s_max;
    m.zeta = zeta;
    m.true_type = true_type;
    m.validate();
    return m;
}

void MarketConfig::validate() const {
    const std::size_t n = demands.size();
    if (n == 0) throw std::invalid_argument("market config: no CSs");
    if (rho_unit.size() != n || varrho.size() != n) {
        throw std::invalid_argument("market config: per-CS vector size mismatch");
    }
    for (double v : rho_unit) {
        if (v <= 0.0) throw std::invalid_argument("market config: rho_unit must be positive");
    }
    for (double v : varrho) {
        if (v <= 0.0) throw std::invalid_argument("market config: varrho must be positive");
    }
    for (double d : demands) {
        if (d < 0.0) throw std::invalid_argument("market config: negative demand");
    }
    if (kappa <= 0.0) throw std::invalid_argument("market config: kappa must be positive");
    if (max_rounds < 1) throw std::invalid_argument("market config: max_rounds must be >= 1");
}

MarketConfig MarketConfig::defaults(std::vector<double> demands) {
    MarketConfig c;
    const std::size_t n = demands.size();
    c.demands = std::move(demands);
    c.rho_unit.assign(n, 200.0);
    c.varrho.assign(n, 220.0);
    return c;
}

// --- SGP utilities -----------------------------------------------------------

double sgp_gain(const MenuSet& menus, const Allocation& alloc, int phi,
                const SgpTypeModel& model) {
    const std::size_t t = static_cast<std::size_t>(model.index_of(phi));
    double s = 0.0;
    for (std::size_t i = 0; i < menus.size(); ++i) {
        s += alloc.pi[i] * menus[i].payment[t];
    }
    return std::log1p(s);
}

double sgp_cost(const MenuSet& menus, const Allocation& alloc, int phi,
                const SgpTypeModel& model) {
    const std::size_t t = static_cast<std::size_t>(model.index_of(phi));
    double s = 0.0;
    for (std::size_t i = 0; i < menus.size(); ++i) {
        s += alloc.pi[i] * menus[i].energy[t];
    }
    return model.zeta * s;
}

double sgp_utility(int phi, const MenuSet& menus, const Allocation& alloc,
                   const SgpTypeModel& model) {
    return static_cast<double>(phi) * sgp_gain(menus, alloc, phi, model) -
           sgp_cost(menus, alloc, phi, model);
}

// --- P1 ----------------------------------------------------------------------

namespace {

// Euclidean projection onto {0 <= pi <= 1, xi . pi <= cap} via bisection on
// the capacity multiplier.
Eigen::VectorXd project_capacity_box(const Eigen::VectorXd& z,
                                     const Eigen::VectorXd& xi, double cap) {
    const auto clamp_box = [](const Eigen::VectorXd& v) {
        return v.cwiseMax(0.0).cwiseMin(1.0);
    };
    Eigen::VectorXd p = clamp_box(z);
    if (xi.dot(p) <= cap) return p;

    double lo = 0.0;
    double hi = 1.0;
    const auto load = [&](double mu) {
        return xi.dot(clamp_box(z - mu * xi)) - cap;
    };
    while (load(hi) > 0.0 && hi < 1e18) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (load(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return clamp_box(z - hi * xi);
}

}  // namespace

Allocation solve_p1(const MenuSet& menus, int phi, const SgpTypeModel& model) {
    const std::size_t n = menus.size();
    const std::size_t t = static_cast<std::size_t>(model.index_of(phi));
    const double cap = model.capacity(phi);
    const double zeta = model.zeta;
    const double type = static_cast<double>(phi);

    Allocation out;
    out.pi.assign(n, 0.0);

    if (n == 1) {
        const double rho = menus[0].payment[t];
        const double xi = menus[0].energy[t];
        double pi;
        if (rho <= 0.0) {
            pi = 0.0;  // objective non-increasing in pi
        } else if (xi <= 0.0) {
            pi = 1.0;  // pure gain, no cost or capacity use
        } else {
            const double stationary = type / (zeta * xi) - 1.0 / rho;
            pi = std::clamp(stationary, 0.0, std::min(1.0, cap / xi));
        }
        out.pi[0] = pi;
        return out;
    }

    Eigen::VectorXd rho(n), xi(n);
    for (std::size_t i = 0; i < n; ++i) {
        rho(static_cast<Eigen::Index>(i)) = menus[i].payment[t];
        xi(static_cast<Eigen::Index>(i)) = menus[i].energy[t];
    }

    const auto grad = [&](const Eigen::VectorXd& p) {
        const double s = rho.dot(p);
        return (type / (1.0 + s)) * rho - zeta * xi;
    };
    const auto value = [&](const Eigen::VectorXd& p) {
        return type * std::log1p(rho.dot(p)) - zeta * xi.dot(p);
    };

    Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    Eigen::VectorXd g = grad(p);
    double step = 1.0 / std::max(1.0, g.cwiseAbs().maxCoeff());
    Eigen::VectorXd prev_p = p, prev_g = g;

    const int max_iters = 20000;
    for (int it = 0; it < max_iters; ++it) {
        // KKT fixed-point residual with unit step.
        const Eigen::VectorXd fixed = project_capacity_box(p + g, xi, cap);
        if ((fixed - p).cwiseAbs().maxCoeff() <= 1e-9) break;

        if (it > 0) {
            const Eigen::VectorXd s_vec = p - prev_p;
            const Eigen::VectorXd y_vec = prev_g - g;  // gradient of -f changes sign
            const double sy = s_vec.dot(y_vec);
            if (sy > 1e-16) {
                step = std::clamp(s_vec.squaredNorm() / sy, 1e-12, 1e12);
            }
        }
        prev_p = p;
        prev_g = g;

        double alpha = step;
        const double f0 = value(p);
        for (int ls = 0; ls < 60; ++ls) {
            const Eigen::VectorXd cand = project_capacity_box(p + alpha * g, xi, cap);
            const Eigen::VectorXd diff = cand - p;
            if (diff.cwiseAbs().maxCoeff() == 0.0) break;
            if (value(cand) >= f0 + 1e-4 * g.dot(diff)) {
                p = cand;
                break;
            }
            alpha *= 0.5;
        }
        g = grad(p);
    }

    for (std::size_t i = 0; i < n; ++i) out.pi[i] = p(static_cast<Eigen::Index>(i));
    return out;
}

// --- CS utilities and audits -------------------------------------------------

double cs_expected_utility(std::size_t cs, const MenuSet& menus,
                           const Allocation& alloc, const SgpTypeModel& model,
                           const MarketConfig& config) {
    const auto T = static_cast<std::size_t>(model.type_count());
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        sum += model.probs[t] *
               (config.varrho[cs] * menus[cs].energy[t] - menus[cs].payment[t]);
    }
    return alloc.pi[cs] * sum;
}

std::vector<double> check_ir(const MenuSet& menus, const Allocation& alloc,
                             const SgpTypeModel& model) {
    std::vector<double> residuals;
    for (int phi = model.phi_min; phi <= model.phi_max; ++phi) {
        residuals.push_back(sgp_utility(phi, menus, alloc, model));
    }
    return residuals;
}

Eigen::MatrixXd check_ic(const MenuSet& menus, const Allocation& alloc,
                         const SgpTypeModel& model) {
    const int T = model.type_count();
    // Utility of type phi when taking the bundle designed for phi_hat.
    const auto cross = [&](int phi, int phi_hat) {
        return static_cast<double>(phi) * sgp_gain(menus, alloc, phi_hat, model) -
               sgp_cost(menus, alloc, phi_hat, model);
    };
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(T, T);
    for (int a = 0; a < T; ++a) {
        const int phi = model.phi_min + a;
        const double own = cross(phi, phi);
        for (int b = 0; b < T; ++b) {
            if (a == b) continue;
            r(a, b) = own - cross(phi, model.phi_min + b);
        }
    }
    return r;
}

ConstraintCounts constraint_counts(int phi_tot) {
    ConstraintCounts c;
    const auto t = static_cast<std::size_t>(phi_tot);
    c.p3_form = t * t + t;
    c.p5_form = 3 * t + 1;
    return c;
}

std::vector<ConstraintRef> build_p3_constraints(const SgpTypeModel& model) {
    std::vector<ConstraintRef> out;
    for (int phi = model.phi_min; phi <= model.phi_max; ++phi) {
        out.push_back({ConstraintKind::capacity, phi, 0, false});
    }
    for (int phi = model.phi_min; phi <= model.phi_max; ++phi) {
        out.push_back({ConstraintKind::ir, phi, 0, false});
    }
    for (int phi = model.phi_min; phi <= model.phi_max; ++phi) {
        for (int phi_hat = model.phi_min; phi_hat <= model.phi_max; ++phi_hat) {
            if (phi == phi_hat) continue;
            out.push_back({ConstraintKind::ic_pair, phi, phi_hat, false});
        }
    }
    return out;
}

std::vector<ConstraintRef> build_p5_constraints(const SgpTypeModel& model) {
    std::vector<ConstraintRef> out;
    for (int phi = model.phi_min; phi <= model.phi_max; ++phi) {
        out.push_back({ConstraintKind::capacity, phi, 0, false});
    }
    out.push_back({ConstraintKind::ir, model.phi_min, 0, false});
    for (int phi = model.phi_min; phi <= model.phi_max; ++phi) {
        out.push_back({ConstraintKind::local_ic, phi, 0, phi == model.phi_min});
    }
    for (int phi = model.phi_min; phi <= model.phi_max; ++phi) {
        out.push_back({ConstraintKind::monotonicity, phi, 0, phi == model.phi_min});
    }
    return out;
}

MonotonicityCheck check_monotonicity(const ContractMenu& menu,
                                     const SgpTypeModel& model) {
    MonotonicityCheck c;
    for (int phi = model.phi_min + 1; phi <= model.phi_max; ++phi) {
        const auto t = static_cast<std::size_t>(model.index_of(phi));
        if (menu.payment[t] - menu.payment[t - 1] < -1e-10) {
            c.ok = false;
            c.first_violation_phi = phi;
            return c;
        }
    }
    return c;
}

namespace {

struct AggregateState {
    // x[t] = sum_i pi_i * payment_i(t); y[t] likewise for energy.
    std::vector<double> x, y;
};

AggregateState aggregates(const MenuSet& menus, const Allocation& alloc,
                          const SgpTypeModel& model) {
    const auto T = static_cast<std::size_t>(model.type_count());
    AggregateState a;
    a.x.assign(T, 0.0);
    a.y.assign(T, 0.0);
    for (std::size_t i = 0; i < menus.size(); ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            a.x[t] += alloc.pi[i] * menus[i].payment[t];
            a.y[t] += alloc.pi[i] * menus[i].energy[t];
        }
    }
    return a;
}

}  // namespace

double p5_violation(const MenuSet& menus, const Allocation& alloc,
                    const SgpTypeModel& model) {
    const auto T = static_cast<std::size_t>(model.type_count());
    const AggregateState a = aggregates(menus, alloc, model);
    double viol = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const int phi = model.phi_min + static_cast<int>(t);
        viol = std::max(viol, a.y[t] - model.capacity(phi));  // capacity
    }
    viol = std::max(viol, model.zeta * a.y[0] -
                              static_cast<double>(model.phi_min) * std::log1p(a.x[0]));
    for (std::size_t t = 1; t < T; ++t) {
        const double phi = static_cast<double>(model.phi_min + static_cast<int>(t));
        const double lic = phi * (a.x[t] - a.x[t - 1]) -
                           (1.0 + a.x[t]) * model.zeta * (a.y[t] - a.y[t - 1]);
        viol = std::max(viol, -lic);
    }
    for (const auto& m : menus) {
        for (std::size_t t = 1; t < T; ++t) {
            viol = std::max(viol, m.payment[t - 1] - m.payment[t]);
        }
        for (std::size_t t = 0; t < T; ++t) {
            const int phi = model.phi_min + static_cast<int>(t);
            viol = std::max(viol, -m.payment[t]);
            viol = std::max(viol, -m.energy[t]);
            viol = std::max(viol, m.energy[t] - model.capacity(phi));
        }
    }
    return viol;
}

// --- Best response ------------------------------------------------------------

namespace {

// Own-variable view of the transformed constraint system for one CS, with the
// other menus and the allocation folded into per-type offsets.
struct BrProblem {
    int T = 0;
    double w = 0.0;      // own allocation share pi_i
    double zeta = 0.0;
    double varrho = 0.0;
    double phi_min = 0.0;
    std::vector<double> phi;    // absolute type values per offset
    std::vector<double> prob;   // p(phi)
    std::vector<double> cap;    // S(phi)
    std::vector<double> a_x;    // others' pi*payment per type
    std::vector<double> a_y;    // others' pi*energy per type

    // Variables: v = [payment_0..payment_{T-1}, energy_0..energy_{T-1}].
    double utility(const Eigen::VectorXd& v) const {
        double sum = 0.0;
        for (int t = 0; t < T; ++t) {
            sum += prob[static_cast<std::size_t>(t)] *
                   (varrho * v(T + t) - v(t));
        }
        return w * sum;
    }

    void utility_gradient(Eigen::VectorXd& g) const {
        for (int t = 0; t < T; ++t) {
            g(t) = -w * prob[static_cast<std::size_t>(t)];
            g(T + t) = w * prob[static_cast<std::size_t>(t)] * varrho;
        }
    }

    double x_at(const Eigen::VectorXd& v, int t) const {
        return a_x[static_cast<std::size_t>(t)] + w * v(t);
    }
    double y_at(const Eigen::VectorXd& v, int t) const {
        return a_y[static_cast<std::size_t>(t)] + w * v(T + t);
    }

    // Residuals g_c(v) >= 0. Order: capacity per type, request cap per type,
    // IR, local IC t>=1, monotonicity t>=1.
    void residuals(const Eigen::VectorXd& v, std::vector<double>& r) const {
        r.clear();
        for (int t = 0; t < T; ++t) {
            r.push_back(cap[static_cast<std::size_t>(t)] - y_at(v, t));
        }
        for (int t = 0; t < T; ++t) {
            r.push_back(cap[static_cast<std::size_t>(t)] - v(T + t));
        }
        r.push_back(phi_min * std::log1p(x_at(v, 0)) - zeta * y_at(v, 0));
        for (int t = 1; t < T; ++t) {
            const double dx = x_at(v, t) - x_at(v, t - 1);
            const double dy = y_at(v, t) - y_at(v, t - 1);
            r.push_back(phi[static_cast<std::size_t>(t)] * dx -
                        (1.0 + x_at(v, t)) * zeta * dy);
        }
        for (int t = 1; t < T; ++t) {
            r.push_back(v(t) - v(t - 1));
        }
    }

    double max_violation(const Eigen::VectorXd& v) const {
        std::vector<double> r;
        residuals(v, r);
        double viol = 0.0;
        for (double g : r) viol = std::max(viol, -g);
        for (Eigen::Index i = 0; i < v.size(); ++i) viol = std::max(viol, -v(i));
        return viol;
    }

    // F = -utility + mu * sum max(0, -g)^2, with gradient.
    double penalized(const Eigen::VectorXd& v, double mu,
                     Eigen::VectorXd& grad) const {
        grad.setZero();
        Eigen::VectorXd ug(2 * T);
        utility_gradient(ug);
        double value = -utility(v);
        grad -= ug;

        const auto add_violation = [&](double g, const auto& add_grad_of_g) {
            if (g >= 0.0) return;
            value += mu * g * g;
            // d/dv of mu*g^2 = 2*mu*g * dg/dv with g negative.
            add_grad_of_g(2.0 * mu * g);
        };

        for (int t = 0; t < T; ++t) {
            add_violation(cap[static_cast<std::size_t>(t)] - y_at(v, t),
                          [&](double c) { grad(T + t) += c * (-w); });
        }
        for (int t = 0; t < T; ++t) {
            add_violation(cap[static_cast<std::size_t>(t)] - v(T + t),
                          [&](double c) { grad(T + t) += c * (-1.0); });
        }
        {
            const double x0 = x_at(v, 0);
            add_violation(phi_min * std::log1p(x0) - zeta * y_at(v, 0),
                          [&](double c) {
                              grad(0) += c * (phi_min * w / (1.0 + x0));
                              grad(T) += c * (-zeta * w);
                          });
        }
        for (int t = 1; t < T; ++t) {
            const double xt = x_at(v, t);
            const double dx = xt - x_at(v, t - 1);
            const double dy = y_at(v, t) - y_at(v, t - 1);
            const double ph = phi[static_cast<std::size_t>(t)];
            add_violation(ph * dx - (1.0 + xt) * zeta * dy, [&](double c) {
                grad(t) += c * (ph * w - w * zeta * dy);
                grad(t - 1) += c * (-ph * w);
                grad(T + t) += c * (-(1.0 + xt) * zeta * w);
                grad(T + t - 1) += c * ((1.0 + xt) * zeta * w);
            });
        }
        for (int t = 1; t < T; ++t) {
            add_violation(v(t) - v(t - 1), [&](double c) {
                grad(t) += c;
                grad(t - 1) -= c;
            });
        }
        return value;
    }

    // Energy at the per-type maximum (request cap and shared-capacity room),
    // payments at the minimal level supported by IR and the local IC forward
    // recursion. A strong warm start: the utility gradient favors maximal
    // energy and minimal payments whenever the charging price dominates the
    // marginal IC payment rate.
    Eigen::VectorXd floors_start() const {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(2 * T);
        for (int t = 0; t < T; ++t) {
            const double room =
                (cap[static_cast<std::size_t>(t)] - a_y[static_cast<std::size_t>(t)]) / w;
            v(T + t) = std::max(0.0, std::min(cap[static_cast<std::size_t>(t)], room));
        }
        {
            const double need = std::expm1(zeta * y_at(v, 0) / phi_min) - a_x[0];
            v(0) = std::max(0.0, need / w);
        }
        for (int t = 1; t < T; ++t) {
            const double ph = phi[static_cast<std::size_t>(t)];
            const double dy = y_at(v, t) - y_at(v, t - 1);
            double needed_x = -1.0;
            if (dy > 0.0 && ph > zeta * dy) {
                needed_x = (ph * x_at(v, t - 1) + zeta * dy) / (ph - zeta * dy);
            }
            double r = std::max(v(t - 1), 0.0);
            if (needed_x > 0.0) {
                r = std::max(r, (needed_x - a_x[static_cast<std::size_t>(t)]) / w);
            }
            v(t) = r;
        }
        return v;
    }

    // Deterministic exact-feasibility polish for a near-feasible point: each
    // pass enforces nonnegativity, monotonicity, capacity, IR, and local IC by
    // single-variable moves that only spend utility, never gain it.
    void polish(Eigen::VectorXd& v, double tol) const {
        for (int pass = 0; pass < 64; ++pass) {
            if (max_violation(v) <= tol * 0.5) return;
            for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::max(v(i), 0.0);
            for (int t = 1; t < T; ++t) v(t) = std::max(v(t), v(t - 1));
            if (w <= 0.0) return;
            for (int t = 0; t < T; ++t) {
                v(T + t) = std::min(v(T + t), cap[static_cast<std::size_t>(t)]);
                const double room = cap[static_cast<std::size_t>(t)] -
                                    a_y[static_cast<std::size_t>(t)];
                if (room < 0.0) return;  // not repairable with own variables
                v(T + t) = std::min(v(T + t), room / w);
            }
            {
                const double need =
                    std::expm1(zeta * y_at(v, 0) / phi_min) - a_x[0];
                if (need / w > v(0)) v(0) = need / w;
            }
            for (int t = 1; t < T; ++t) {
                const double xt = x_at(v, t);
                const double dy = y_at(v, t) - y_at(v, t - 1);
                const double lic = phi[static_cast<std::size_t>(t)] *
                                       (xt - x_at(v, t - 1)) -
                                   (1.0 + xt) * zeta * dy;
                if (lic >= 0.0) continue;
                const double d_dr = w * (phi[static_cast<std::size_t>(t)] - zeta * dy);
                if (d_dr > 1e-12) {
                    v(t) += -lic / d_dr * (1.0 + 1e-12);
                } else if (dy > 0.0) {
                    // Lower the energy step instead.
                    v(T + t) -= -lic / ((1.0 + xt) * zeta * w) * (1.0 + 1e-12);
                    v(T + t) = std::max(v(T + t), 0.0);
                }
            }
        }
    }
};

BrProblem make_br_problem(std::size_t cs, const MenuSet& menus,
                          const Allocation& alloc, const SgpTypeModel& model,
                          const MarketConfig& config) {
    BrProblem p;
    p.T = model.type_count();
    p.w = alloc.pi[cs];
    p.zeta = model.zeta;
    p.varrho = config.varrho[cs];
    p.phi_min = static_cast<double>(model.phi_min);
    const auto T = static_cast<std::size_t>(p.T);
    p.phi.resize(T);
    p.prob = model.probs;
    p.cap.resize(T);
    p.a_x.assign(T, 0.0);
    p.a_y.assign(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        const int phi = model.phi_min + static_cast<int>(t);
        p.phi[t] = static_cast<double>(phi);
        p.cap[t] = model.capacity(phi);
    }
    for (std::size_t j = 0; j < menus.size(); ++j) {
        if (j == cs) continue;
        for (std::size_t t = 0; t < T; ++t) {
            p.a_x[t] += alloc.pi[j] * menus[j].payment[t];
            p.a_y[t] += alloc.pi[j] * menus[j].energy[t];
        }
    }
    return p;
}

Eigen::VectorXd menu_to_vector(const ContractMenu& menu) {
    const auto T = static_cast<Eigen::Index>(menu.payment.size());
    Eigen::VectorXd v(2 * T);
    for (Eigen::Index t = 0; t < T; ++t) {
        v(t) = menu.payment[static_cast<std::size_t>(t)];
        v(T + t) = menu.energy[static_cast<std::size_t>(t)];
    }
    return v;
}

ContractMenu vector_to_menu(const Eigen::VectorXd& v) {
    const auto T = v.size() / 2;
    ContractMenu m;
    m.payment.resize(static_cast<std::size_t>(T));
    m.energy.resize(static_cast<std::size_t>(T));
    for (Eigen::Index t = 0; t < T; ++t) {
        m.payment[static_cast<std::size_t>(t)] = v(t);
        m.energy[static_cast<std::size_t>(t)] = v(T + t);
    }
    return m;
}

// Projected-gradient descent with BB steps and Armijo backtracking on the
// penalized objective, nonnegative orthant projection.
void minimize_penalized(const BrProblem& p, double mu, int max_iters,
                        Eigen::VectorXd& v) {
    const auto project = [](Eigen::VectorXd& u) {
        for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = std::max(u(i), 0.0);
    };
    Eigen::VectorXd grad(v.size()), cand_grad(v.size());
    double f = p.penalized(v, mu, grad);
    double step = 1.0;
    Eigen::VectorXd prev_v = v, prev_g = grad;
    bool have_prev = false;

    for (int it = 0; it < max_iters; ++it) {
        if (have_prev) {
            const Eigen::VectorXd s = v - prev_v;
            const Eigen::VectorXd y = grad - prev_g;
            const double sy = s.dot(y);
            if (sy > 1e-18) {
                step = std::clamp(s.squaredNorm() / sy, 1e-14, 1e10);
            }
        }
        prev_v = v;
        prev_g = grad;

        double alpha = step;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            Eigen::VectorXd cand = v - alpha * grad;
            project(cand);
            const Eigen::VectorXd diff = cand - v;
            const double dnorm = diff.cwiseAbs().maxCoeff();
            if (dnorm == 0.0) break;
            const double fc = p.penalized(cand, mu, cand_grad);
            if (fc <= f + 1e-4 * grad.dot(diff)) {
                v = cand;
                f = fc;
                grad = cand_grad;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!moved) break;
        have_prev = true;

        // Projected-gradient stationarity check.
        Eigen::VectorXd probe = v - grad;
        project(probe);
        const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
        if ((probe - v).cwiseAbs().maxCoeff() <= 1e-11 * scale) break;
    }
}

}  // namespace

BestResponseResult best_response(std::size_t cs, const MenuSet& menus,
                                 const Allocation& alloc,
                                 const SgpTypeModel& model,
                                 const MarketConfig& config,
                                 const ContractMenu& start, std::uint64_t seed) {
    const BrProblem p = make_br_problem(cs, menus, alloc, model, config);
    const Eigen::VectorXd v_start = menu_to_vector(start);

    BestResponseResult best;
    best.menu = start;
    best.utility = p.utility(v_start);
    best.max_violation = p.max_violation(v_start);
    best.feasible = best.max_violation <= config.feasibility_tol;
    best.start_violation = best.max_violation;

    // A CS with zero allocation cannot affect its utility or the aggregates.
    if (p.w <= 0.0) return best;

    const double scale_r = std::max(1.0, v_start.head(p.T).cwiseAbs().maxCoeff());
    const double scale_e = std::max(1.0, v_start.tail(p.T).cwiseAbs().maxCoeff());

    bool have_candidate = best.feasible;  // a feasible start already competes
    BestResponseResult fallback = best;   // least-violating point seen

    for (int r = 0; r < config.restarts; ++r) {
        Eigen::VectorXd v = v_start;
        if (r == 1) {
            // One restart is the analytic max-energy/minimal-payment point
            // instead of a random perturbation.
            v = p.floors_start();
        } else if (r > 1) {
            rng::Engine eng(rng::derive(seed, "restart", r));
            for (int t = 0; t < p.T; ++t) {
                v(t) = std::max(0.0, v(t) * (1.0 + 0.4 * (eng.uniform() - 0.5)) +
                                         scale_r * 0.2 * (eng.uniform() - 0.5));
                v(p.T + t) =
                    std::max(0.0, v(p.T + t) * (1.0 + 0.4 * (eng.uniform() - 0.5)) +
                                      scale_e * 0.2 * (eng.uniform() - 0.5));
            }
        }
        for (double mu = 10.0; mu <= config.penalty_mu_max * 1.0001; mu *= 10.0) {
            minimize_penalized(p, mu, config.max_inner_iterations, v);
        }
        p.polish(v, config.feasibility_tol);

        const double viol = p.max_violation(v);
        const double util = p.utility(v);
        if (viol <= config.feasibility_tol) {
            if (!have_candidate || util > best.utility) {
                best.menu = vector_to_menu(v);
                best.utility = util;
                best.max_violation = viol;
                best.feasible = true;
                have_candidate = true;
            }
        } else if (viol < fallback.max_violation) {
            fallback.menu = vector_to_menu(v);
            fallback.utility = util;
            fallback.max_violation = viol;
            fallback.feasible = false;
        }
    }

    if (!have_candidate && !best.feasible) {
        return fallback;  // infeasible-only outcome, flagged via feasible=false
    }
    return best;
}

// --- Equilibrium iteration -----------------------------------------------------

EquilibriumResult iterate_contracts(const SgpTypeModel& model,
                                    const MarketConfig& config,
                                    const MenuSet& initial,
                                    std::uint64_t seed) {
    model.validate();
    config.validate();
    if (initial.size() != config.cs_count()) {
        throw std::invalid_argument("iterate_contracts: menu count mismatch");
    }

    EquilibriumResult result;
    result.menus = initial;
    const std::size_t n = initial.size();

    const auto T = static_cast<std::size_t>(model.type_count());
    const auto is_zero_menu = [&](const ContractMenu& m) {
        for (std::size_t t = 0; t < T; ++t) {
            if (m.payment[t] != 0.0 || m.energy[t] != 0.0) return false;
        }
        return true;
    };
    const ContractMenu zero_menu{std::vector<double>(T, 0.0),
                                 std::vector<double>(T, 0.0)};

    for (int round = 1; round <= config.max_rounds; ++round) {
        result.pi_hat = solve_p1(result.menus, model.true_type, model);
        bool any_accept = false;
        // Offers the SGP allocates nothing to lapse: a zero-allocation CS is
        // indifferent across menus, and its stale request otherwise keeps
        // perturbing the allocation problem round after round.
        for (std::size_t i = 0; i < n; ++i) {
            if (result.pi_hat.pi[i] == 0.0 && !is_zero_menu(result.menus[i])) {
                result.menus[i] = zero_menu;
                any_accept = true;
                result.acceptances.push_back({round, i, 0.0, 0.0, true});
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double u_old = cs_expected_utility(i, result.menus, result.pi_hat,
                                                     model, config);
            const BestResponseResult br =
                best_response(i, result.menus, result.pi_hat, model, config,
                              result.menus[i], rng::derive(seed, "br", i));
            const bool improves = br.feasible && br.utility - u_old > config.kappa;
            // The re-solved allocation can strand a previously accepted menu
            // outside the common constraints; an infeasible menu is not a
            // valid contract, so replacing it with a feasible best response is
            // not gated on the kappa improvement rule.
            const bool restores =
                br.feasible && br.start_violation > config.audit_tol;
            if (improves || restores) {
                result.menus[i] = br.menu;
                any_accept = true;
                result.acceptances.push_back(
                    {round, i, u_old, br.utility, !improves});
            }
        }
        result.rounds = round;
        if (!any_accept) {
            result.converged = true;
            break;
        }
    }

    result.pi_hat = solve_p1(result.menus, model.true_type, model);
    result.expected_utilities.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        result.expected_utilities[i] =
            cs_expected_utility(i, result.menus, result.pi_hat, model, config);
    }
    result.max_constraint_violation =
        p5_violation(result.menus, result.pi_hat, model);

    const auto ir = check_ir(result.menus, result.pi_hat, model);
    result.min_ir_residual = *std::min_element(ir.begin(), ir.end());
    const Eigen::MatrixXd ic = check_ic(result.menus, result.pi_hat, model);
    result.min_ic_residual = ic.minCoeff();
    for (const auto& menu : result.menus) {
        if (!check_monotonicity(menu, model).ok) result.payments_monotone = false;
    }
    for (int phi = model.phi_min; phi <= model.phi_max; ++phi) {
        result.welfare_by_type.push_back(
            social_welfare(phi, result.menus, result.pi_hat, model, config));
    }
    return result;
}

double social_welfare(int phi, const MenuSet& menus, const Allocation& alloc,
                      const SgpTypeModel& model, const MarketConfig& config) {
    const auto t = static_cast<std::size_t>(model.index_of(phi));
    double cs_sum = 0.0;
    for (std::size_t i = 0; i < menus.size(); ++i) {
        cs_sum += alloc.pi[i] *
                  (config.varrho[i] * menus[i].energy[t] - menus[i].payment[t]);
    }
    return sgp_utility(phi, menus, alloc, model) + cs_sum;
}

MenuSet initial_menus(const SgpTypeModel& model, const MarketConfig& config) {
    const auto T = static_cast<std::size_t>(model.type_count());
    MenuSet menus(config.cs_count());
    for (std::size_t i = 0; i < menus.size(); ++i) {
        menus[i].payment.resize(T);
        menus[i].energy.resize(T);
        for (std::size_t t = 0; t < T; ++t) {
            const int phi = model.phi_min + static_cast<int>(t);
            const double xi = config.demands[i] * static_cast<double>(phi) /
                              static_cast<double>(model.phi_max);
            menus[i].energy[t] = xi;
            menus[i].payment[t] = config.rho_unit[i] * xi;
        }
    }
    return menus;
}

}  // namespace evmarket::market
