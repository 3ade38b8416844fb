from gradspin.verify import (
    gradient_suite,
    identity_suite,
    key_bound_suite,
    mixing_suite,
    product_suite,
    run_all,
    worst_relative,
)


def test_all_suites_pass_at_default_sizes():
    results = run_all()
    failed = [r.name for r in results if not r.passed]
    assert not failed
    assert worst_relative(results) <= 1.0
    assert max(r.worst_residual for r in results) <= 1e-8


def test_narrowed_grid_passes():
    assert all(r.passed for r in run_all(n_max=10))


def test_corrupted_diffusion_fails_gradient_suite():
    results = gradient_suite(n_configs=20, corrupt_diffusion=True)
    assert not any(r.passed for r in results)


def test_individual_suites():
    assert identity_suite(n_max=50).passed
    assert mixing_suite().passed
    assert all(r.passed for r in product_suite(n_max=20))
    assert all(r.passed for r in key_bound_suite(n_max=30, n_real=1000))
    # results serialize
    assert set(identity_suite(n_max=5).to_dict()) == {"name", "passed", "worst_residual", "tolerance", "checked", "seconds"}
