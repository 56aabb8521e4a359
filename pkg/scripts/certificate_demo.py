"""Check both Lyapunov certificates on the quadratic configs and print the worst margins."""

from dpds import harness


def main():
    for path in ("configs/quadratic_ct.json", "configs/quadratic_dt.json"):
        res = harness.verify_suite(harness.load_config(path), "lyapunov")
        print(path)
        for line in res.lines:
            print("   ", line)


if __name__ == "__main__":
    main()
