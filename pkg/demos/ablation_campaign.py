"""Compare sorted DE, unsorted DE, and random search on one campaign.

Runs all three attack arms over the same images with the same budget and
prints per-method success rates plus the class-confusion heatmap of the
sorted arm. Sorting the codebook gives the optimizer a smooth index
axis, which shows up as the best success rate of the three.

    python3 demos/ablation_campaign.py
"""

from vqattack import (
    DEConfig,
    class_templates,
    fixture_from_templates,
    format_summary,
    make_dataset,
    run_batch,
    success_heatmap,
    train_codebook_lbg,
)


def main():
    templates = class_templates(10, 32, 32, 1, seed=0)
    images, labels = make_dataset(templates, 100, seed=0, noise=12)
    oracle = fixture_from_templates(templates, temperature=10.0)
    codebook = train_codebook_lbg(images, 256, 4, 4, seed=0)

    config = DEConfig(population_size=50, generations=10)
    report = run_batch(oracle, images, labels, codebook,
                       config=config, seed=0, workers=8)
    print(format_summary(report))

    heat = success_heatmap(report, "de")
    print("\nsorted-DE confusion counts (rows: true class, cols: adversarial):")
    print("     " + " ".join(f"{j:3d}" for j in range(heat.shape[1])))
    for i, row in enumerate(heat):
        print(f"  {i:2d} " + " ".join(f"{int(v):3d}" for v in row))
    print("\ndiagonal is structurally zero: success means the label moved")


if __name__ == "__main__":
    main()
