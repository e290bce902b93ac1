import numpy as np
import pytest

from rasphy import (AmbiguousCherry, DisconnectedTrustGraph,
                    ReconstructionConfig, end_to_end_contract_check,
                    generate_random_regular, inject_distortion, parse_newick,
                    reconstruct_topology, robinson_foulds, tree_metric)

NOISELESS = ReconstructionConfig(trust_cap=np.inf, tau=0.0)


class TestNoiseless:
    def test_exact_quartet(self, quartet):
        d = tree_metric(quartet)
        topo = reconstruct_topology(d, NOISELESS, labels=quartet.labels)
        assert topo == quartet.topology()

    def test_caterpillar_eight(self):
        text = "(a:1,(b:1,(c:1,(d:1,(e:1,(f:1,(g:1,h:1):1):1):1):1):1):1);"
        cat = parse_newick(text)
        topo = reconstruct_topology(tree_metric(cat), NOISELESS,
                                    labels=cat.labels)
        assert robinson_foulds(topo, cat) == 0

    @pytest.mark.parametrize("n", [8, 16, 32, 64])
    def test_random_trees_rf_zero(self, n, reg_01_02):
        for seed in range(3):
            tree = generate_random_regular(n, reg_01_02, seed=seed)
            topo = reconstruct_topology(tree_metric(tree), NOISELESS,
                                        labels=tree.labels)
            assert robinson_foulds(topo, tree) == 0

    def test_determinism(self, reg_01_02):
        tree = generate_random_regular(24, reg_01_02, seed=5)
        d = tree_metric(tree)
        one = reconstruct_topology(d, NOISELESS, labels=tree.labels)
        two = reconstruct_topology(d, NOISELESS, labels=tree.labels)
        assert one.to_newick() == two.to_newick()


class TestDistorted:
    def test_synthetic_distortion_recovers(self, reg_01_02):
        f, g = reg_01_02.min_edge, reg_01_02.max_edge
        n = 64
        psi = 5 * g * np.log(n)
        cfg = ReconstructionConfig(trust_cap=psi, tau=f / 10)
        for seed in range(20):
            tree = generate_random_regular(n, reg_01_02, seed=seed)
            dhat = inject_distortion(tree_metric(tree), f / 10, psi,
                                     seed=seed + 1)
            topo = reconstruct_topology(dhat, cfg, labels=tree.labels)
            assert robinson_foulds(topo, tree) == 0

    def test_contract_check_exact_is_certain(self, reg_01_02):
        tree = generate_random_regular(16, reg_01_02, seed=1)
        cfg = ReconstructionConfig(trust_cap=np.inf, tau=0.0)
        rate = end_to_end_contract_check(tree, cfg, 0.0, np.inf,
                                         seeds=range(5))
        assert rate == 1.0

    def test_contract_check_rescaled_metric(self, reg_01_02):
        # an unknown positive rescale with config scaled along is harmless
        tree = generate_random_regular(32, reg_01_02, seed=2)
        lam = 0.37
        f, g = reg_01_02.min_edge, reg_01_02.max_edge
        psi = 5 * lam * g * np.log(32)
        cfg = ReconstructionConfig(trust_cap=psi, tau=lam * f / 5)
        rate = end_to_end_contract_check(tree, cfg, lam * f / 5, psi,
                                         seeds=range(10), lam_scale=lam)
        assert rate >= 0.9

    def test_out_of_contract_never_crashes(self, reg_01_02):
        # tau = 2f violates the contract: failures are allowed, crashes not
        f, g = reg_01_02.min_edge, reg_01_02.max_edge
        tree = generate_random_regular(32, reg_01_02, seed=3)
        psi = 5 * g * np.log(32)
        cfg = ReconstructionConfig(trust_cap=psi, tau=2 * f / 5)
        rate = end_to_end_contract_check(tree, cfg, 2 * f, psi,
                                         seeds=range(5))
        assert 0.0 <= rate <= 1.0

    def test_scale_invariance(self, reg_01_02):
        for seed in range(10):
            tree = generate_random_regular(20, reg_01_02, seed=seed)
            d = tree_metric(tree)
            psi = 5 * reg_01_02.max_edge * np.log(20)
            dhat = inject_distortion(d, 0.01, psi, seed=seed).values
            cfg1 = ReconstructionConfig(trust_cap=psi, tau=0.01)
            scale = 7.3
            cfg2 = ReconstructionConfig(trust_cap=scale * psi,
                                        tau=scale * 0.01)
            one = reconstruct_topology(dhat, cfg1, labels=tree.labels)
            two = reconstruct_topology(scale * dhat, cfg2, labels=tree.labels)
            assert one == two


class TestErrors:
    def test_disconnected_trust_graph(self):
        d = np.full((5, 5), np.inf)
        np.fill_diagonal(d, 0.0)
        with pytest.raises(DisconnectedTrustGraph):
            reconstruct_topology(d, ReconstructionConfig(trust_cap=1.0))

    def test_ambiguous_cherry_on_star(self):
        d = np.full((4, 4), 2.0)
        np.fill_diagonal(d, 0.0)
        with pytest.raises(AmbiguousCherry):
            reconstruct_topology(d, ReconstructionConfig(trust_cap=10.0,
                                                         tau=0.0))

    def test_too_few_leaves(self):
        d = np.zeros((3, 3))
        with pytest.raises(ValueError, match="4 leaves"):
            reconstruct_topology(d, NOISELESS)

    def test_config_validation(self):
        with pytest.raises(ValueError, match="trust_cap"):
            ReconstructionConfig(trust_cap=0.4, tau=0.1)
        with pytest.raises(ValueError, match="witness"):
            ReconstructionConfig(witness_count=1)


class TestInjectDistortion:
    def test_validity_of_injected_distortion(self, reg_01_02):
        from rasphy import verify_distortion
        tree = generate_random_regular(24, reg_01_02, seed=7)
        d = tree_metric(tree)
        tau, psi = 0.02, 1.5
        dhat = inject_distortion(d, tau, psi, seed=8)
        assert verify_distortion(dhat, d, tau, psi).ok

    def test_zero_tau_keeps_exact_entries(self, reg_01_02):
        tree = generate_random_regular(12, reg_01_02, seed=9)
        d = tree_metric(tree)
        dhat = inject_distortion(d, 0.0, np.inf, seed=1).values
        assert np.array_equal(dhat, d)
