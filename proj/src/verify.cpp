#include "commitlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "commitlab/bandit.hpp"
#include "commitlab/errors.hpp"
#include "commitlab/mdp.hpp"
#include "commitlab/rng.hpp"
#include "commitlab/rules.hpp"

namespace commitlab {

namespace {

class Draws {
public:
    Draws(std::uint64_t seed, std::uint64_t stream) : rng_(seed, stream) {}
    double uniform() { return rng_.uniform(n_++); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t integer(std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng_.bits(n_++) % (hi - lo + 1)); }

    BanditInstance bandit(std::size_t kmin, std::size_t kmax) {
        std::size_t k = integer(kmin, kmax);
        Vec r(k);
        for (double& x : r) x = 1.0 - uniform();
        return BanditInstance(r);
    }

    ParamVector theta(std::size_t k, double scale) {
        ParamVector t{Vec(k)};
        for (double& x : t.logits) x = uniform(-scale, scale);
        return t;
    }

private:
    CounterRng rng_;
    std::uint64_t n_ = 0;
};

struct Tally {
    PropertyResult res;
    explicit Tally(std::string name) { res.name = std::move(name); res.worst_margin = std::numeric_limits<double>::infinity(); }
    // margin >= 0 passes
    void add(double margin) {
        ++res.checked;
        if (!(margin >= 0.0)) ++res.failed;
        if (std::isnan(margin)) margin = -std::numeric_limits<double>::infinity();
        res.worst_margin = std::min(res.worst_margin, margin);
    }
};

double norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

Eigen::MatrixXd hessian_under_test(const ParamVector& th, const BanditInstance& inst, bool perturb) {
    Eigen::MatrixXd h = value_hessian(th, inst);
    if (perturb) h += 1e-3 * Eigen::MatrixXd::Identity(h.rows(), h.cols());
    return h;
}

void suite_gradient(const VerifyOptions& o, std::vector<PropertyResult>& out) {
    Draws d(o.seed, 1);
    Tally grad("bandit gradient vs finite differences (rel 1e-6)");
    Tally hess("bandit Hessian vs finite differences (rel 1e-4)");
    for (std::size_t i = 0; i < o.samples; ++i) {
        BanditInstance inst = d.bandit(2, 8);
        ParamVector th = d.theta(inst.num_arms(), 2.0);
        GradientReport g = true_gradient(th, inst);
        Vec fd(th.size());
        const double h = 1e-5;
        for (std::size_t a = 0; a < th.size(); ++a) {
            ParamVector p = th, m = th;
            p.logits[a] += h;
            m.logits[a] -= h;
            fd[a] = (expected_reward(softmax(p), inst) - expected_reward(softmax(m), inst)) / (2 * h);
        }
        Vec diff(fd.size());
        for (std::size_t a = 0; a < fd.size(); ++a) diff[a] = g.gradient[a] - fd[a];
        grad.add(1e-6 - norm(diff) / g.l2_norm);

        Eigen::MatrixXd s = hessian_under_test(th, inst, o.perturb_hessian);
        Eigen::MatrixXd fdh(s.rows(), s.cols());
        const double hh = 1e-4;
        for (std::size_t j = 0; j < th.size(); ++j) {
            ParamVector p = th, m = th;
            p.logits[j] += hh;
            m.logits[j] -= hh;
            GradientReport gp = true_gradient(p, inst), gm = true_gradient(m, inst);
            for (std::size_t a = 0; a < th.size(); ++a)
                fdh(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) = (gp.gradient[a] - gm.gradient[a]) / (2 * hh);
        }
        hess.add(1e-4 - (s - fdh).norm() / fdh.norm());
    }
    out.push_back(grad.res);
    out.push_back(hess.res);
}

void suite_nl(const VerifyOptions& o, std::vector<PropertyResult>& out) {
    Draws d(o.seed, 2);
    Tally t("NL inequality (slack >= -1e-12)");
    for (std::size_t i = 0; i < o.samples; ++i) {
        BanditInstance inst = d.bandit(2, 8);
        t.add(nl_inequality_slack(d.theta(inst.num_arms(), d.uniform(0.1, 10.0)), inst) + 1e-12);
    }
    out.push_back(t.res);
}

void suite_natural_nl(const VerifyOptions& o, std::vector<PropertyResult>& out) {
    Draws d(o.seed, 3);
    Tally c("natural NL continuous (slack >= -1e-12)");
    Tally s("natural NL discrete (slack >= -1e-12)");
    Tally tight("natural NL tightness at K=2 (|slack| < 1e-12)");
    for (std::size_t i = 0; i < o.samples; ++i) {
        BanditInstance inst = d.bandit(2, 8);
        ParamVector th = d.theta(inst.num_arms(), d.uniform(0.1, 10.0));
        NaturalNlSlack nl = natural_nl_slack(th, inst);
        double eta = d.uniform(1e-3, 10.0);
        c.add(nl.continuous_slack + 1e-12);
        s.add(nl.discrete_slack(eta) + 1e-12);
        BanditInstance two = d.bandit(2, 2);
        ParamVector th2 = d.theta(2, d.uniform(0.1, 5.0));
        tight.add(1e-12 - std::abs(natural_nl_slack_continuous(th2, two)));
        tight.add(1e-12 - std::abs(natural_nl_slack_discrete(th2, two, eta)));
    }
    out.push_back(c.res);
    out.push_back(s.res);
    out.push_back(tight.res);
}

void suite_ns(const VerifyOptions& o, std::vector<PropertyResult>& out) {
    Draws d(o.seed, 4);
    Tally t("NS: spectral radius <= 3 ||grad|| + 1e-10");
    for (std::size_t i = 0; i < o.samples; ++i) {
        BanditInstance inst = d.bandit(2, 8);
        ParamVector th = d.theta(inst.num_arms(), d.uniform(0.1, 10.0));
        double rho = spectral_radius(hessian_under_test(th, inst, o.perturb_hessian)).value;
        t.add(3.0 * true_gradient(th, inst).l2_norm + 1e-10 - rho);
    }
    out.push_back(t.res);
}

void suite_smoothness(const VerifyOptions& o, std::vector<PropertyResult>& out) {
    Draws d(o.seed, 5);
    Tally t("smoothness: |change - <grad, step>| <= 5/4 ||step||^2");
    for (std::size_t i = 0; i < o.samples; ++i) {
        BanditInstance inst = d.bandit(2, 8);
        ParamVector a = d.theta(inst.num_arms(), 5.0);
        ParamVector b = a;
        double sq = 0.0;
        double lin = 0.0;
        GradientReport g = true_gradient(a, inst);
        for (std::size_t k = 0; k < a.size(); ++k) {
            double step = d.uniform(-2.0, 2.0);
            b.logits[k] += step;
            sq += step * step;
            lin += g.gradient[k] * step;
        }
        double change = expected_reward(softmax(b), inst) - expected_reward(softmax(a), inst);
        t.add(1.25 * sq + 1e-15 - std::abs(change - lin));
    }
    out.push_back(t.res);
}

void suite_moments(const VerifyOptions& o, std::vector<PropertyResult>& out) {
    Draws d(o.seed, 6);
    Tally pg_mean("PG estimator mean == true gradient (1e-12)");
    Tally pg_second("PG estimator second moment <= 2");
    Tally npg_mean("NPG estimator mean == r (1e-12)");
    Tally npg_second("NPG second moment == sum r^2/pi (rel 1e-10)");
    for (std::size_t i = 0; i < o.samples; ++i) {
        BanditInstance inst = d.bandit(2, 8);
        ParamVector th = d.theta(inst.num_arms(), 3.0);
        PolicyVector pi = softmax(th);
        MomentReport pg = stochastic_moment_oracle(UpdateRuleSpec{RuleKind::PgStoch, 1.0}, th, inst);
        GradientReport g = true_gradient(th, inst);
        double err = 0.0;
        for (std::size_t a = 0; a < th.size(); ++a) err = std::max(err, std::abs(pg.mean_update[a] - g.gradient[a]));
        pg_mean.add(1e-12 - err);
        pg_second.add(2.0 - pg.second_moment);
        MomentReport npg = stochastic_moment_oracle(UpdateRuleSpec{RuleKind::NpgStoch, 1.0}, th, inst);
        double e2 = 0.0;
        double expect = 0.0;
        for (std::size_t a = 0; a < th.size(); ++a) {
            e2 = std::max(e2, std::abs(npg.mean_update[a] - inst.reward(a)));
            expect += inst.reward(a) * inst.reward(a) / pi.probs[a];
        }
        npg_mean.add(1e-12 - e2);
        npg_second.add(1e-10 - std::abs(npg.second_moment - expect) / expect);
    }
    out.push_back(pg_mean.res);
    out.push_back(pg_second.res);
    out.push_back(npg_mean.res);
    out.push_back(npg_second.res);
}

MdpPolicy random_policy(Draws& d, const FiniteMdp& mdp, double scale) {
    MdpPolicy p{Eigen::MatrixXd(static_cast<Eigen::Index>(mdp.num_states()), static_cast<Eigen::Index>(mdp.num_actions()))};
    for (Eigen::Index s = 0; s < p.logits.rows(); ++s)
        for (Eigen::Index a = 0; a < p.logits.cols(); ++a) p.logits(s, a) = d.uniform(-scale, scale);
    return p;
}

void suite_mdp(const VerifyOptions& o, std::vector<PropertyResult>& out) {
    Draws d(o.seed, 7);
    Tally bell("Bellman residual < 1e-10");
    Tally dist("d_mu sums to 1 and d_mu >= (1-gamma) mu");
    Tally range("V and Q in (0, 1/(1-gamma)]");
    Tally pdl("performance difference residual < 1e-10");
    Tally vsub("value sub-optimality residual < 1e-10");
    Tally gnl("general NL slack >= -1e-10");
    Tally adapt("adaptive NPG contraction slack >= -1e-10");
    Tally is_mean("parallel IS mean == Q (1e-10)");
    Tally is_second("parallel IS second moment == sum Q^2/pi (rel 1e-8)");
    Tally pg_second("MDP PG estimator second moment <= 2/(1-gamma)^4");
    Tally grad("MDP gradient vs finite differences (rel 1e-5)");
    const double gammas[] = {0.5, 0.9, 0.99};
    const std::size_t n = std::max<std::size_t>(1, o.samples / 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double gamma = gammas[i % 3];
        FiniteMdp mdp = random_mdp(d.integer(1, 6), d.integer(2, 6), gamma, o.seed * 7919 + i);
        MdpPolicy pol = random_policy(d, mdp, 2.0);
        Eigen::MatrixXd pi = pol.probs();
        ValueBundle v = solve_values(mdp, pol);
        const double vmax = 1.0 / (1.0 - gamma);
        bell.add(1e-10 - bellman_residual(mdp, pi, v.V));
        double dm = 1e-10 - std::abs(v.d_mu.sum() - 1.0);
        for (Eigen::Index s = 0; s < v.d_mu.size(); ++s) dm = std::min(dm, v.d_mu(s) - (1 - gamma) * mdp.mu()(s) + 1e-12);
        dist.add(dm);
        range.add(std::min({v.V.minCoeff(), v.Q.minCoeff(), vmax - v.V.maxCoeff(), vmax - v.Q.maxCoeff()}));
        pdl.add(1e-10 - performance_difference_residual(mdp, pol, random_policy(d, mdp, 3.0)));
        OptimalSolution opt = policy_iteration(mdp);
        if (opt.unique) {
            vsub.add(1e-10 - value_suboptimality_residual(mdp, pol, opt));
            gnl.add(general_nl_slack(mdp, pol, opt) + 1e-10);
            adapt.add(adaptive_npg_contraction_slack(mdp, pol, opt) + 1e-10);
        }
        MdpMoments m = parallel_is_moment_oracle(mdp, pol, v);
        is_mean.add(1e-10 - (m.mean - v.Q).cwiseAbs().maxCoeff());
        double expect = v.Q.cwiseProduct(v.Q).cwiseQuotient(pi).sum();
        is_second.add(1e-8 - std::abs(m.second_moment - expect) / expect);
        MdpMoments pg = mdp_pg_moment_oracle(mdp, pol, v);
        pg_second.add(2.0 / std::pow(1.0 - gamma, 4) - pg.second_moment);

        Eigen::MatrixXd g = mdp_true_gradient(mdp, pi, v);
        Eigen::MatrixXd fd(g.rows(), g.cols());
        const double h = 1e-5;
        for (Eigen::Index s = 0; s < g.rows(); ++s) {
            for (Eigen::Index a = 0; a < g.cols(); ++a) {
                MdpPolicy p = pol, q = pol;
                p.logits(s, a) += h;
                q.logits(s, a) -= h;
                fd(s, a) = (solve_values(mdp, p).v_mu - solve_values(mdp, q).v_mu) / (2 * h);
            }
        }
        grad.add(1e-5 - (g - fd).norm() / g.norm());
    }
    for (Tally* t : {&bell, &dist, &range, &pdl, &vsub, &gnl, &adapt, &is_mean, &is_second, &pg_second, &grad})
        out.push_back(t->res);
}

const std::map<std::string, std::function<void(const VerifyOptions&, std::vector<PropertyResult>&)>>& registry() {
    static const std::map<std::string, std::function<void(const VerifyOptions&, std::vector<PropertyResult>&)>> r{
        {"gradient", suite_gradient}, {"nl", suite_nl},       {"natural-nl", suite_natural_nl},
        {"ns", suite_ns},             {"smoothness", suite_smoothness}, {"moments", suite_moments},
        {"mdp", suite_mdp},
    };
    return r;
}

} // namespace

const std::vector<std::string>& available_suites() {
    static const std::vector<std::string> names{"gradient", "nl", "natural-nl", "ns", "smoothness", "moments", "mdp"};
    return names;
}

std::vector<PropertyResult> run_property_suite(const VerifyOptions& opts) {
    if (opts.suites.empty()) throw InvalidParameter("no property suites selected");
    std::vector<PropertyResult> out;
    for (const auto& name : opts.suites) {
        auto it = registry().find(name);
        if (it == registry().end()) throw InvalidParameter("unknown suite '" + name + "'");
        it->second(opts, out);
    }
    for (auto& r : out)
        if (r.checked == 0) r.worst_margin = 0.0;
    return out;
}

} // namespace commitlab
