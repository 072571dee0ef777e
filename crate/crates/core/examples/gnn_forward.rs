//! GCN and GAT forward passes over an MFG stack, and GAT attention weights.

use spargcp::autodiff::Tape;
use spargcp::graph::{build_mfgs, Fanouts};
use spargcp::harness::{generate_synthetic, SyntheticSpec};
use spargcp::nn::{Backbone, GnnModel, Layer, ModelSpec};

pub fn run_example() -> spargcp::Result<()> {
    let graph = generate_synthetic(&SyntheticSpec {
        blocks: 3,
        nodes_per_block: 20,
        intra_prob: 0.3,
        inter_prob: 0.02,
        feature_dim: 5,
        ..SyntheticSpec::default()
    })?;
    let seeds = [0, 25, 50];
    let mfgs = build_mfgs(&graph, &seeds, 2, &Fanouts::Full, 0)?;

    for backbone in [Backbone::Gcn, Backbone::Gat] {
        let spec = ModelSpec {
            backbone,
            in_dim: graph.feature_dim(),
            hidden_dim: 16,
            num_classes: graph.num_classes(),
            num_layers: 2,
            heads: 2,
            sparsifier: false,
        };
        let model = GnnModel::new(spec, 1)?;
        let (logits, _) = model.predict(&mfgs, graph.features(), 0.0)?;
        println!(
            "{}: {} parameters, logits {:?}",
            backbone.as_str(),
            model.params().num_scalars(),
            logits
        );

        if let Layer::Gat(layer) = &model.layers()[1] {
            let tape = Tape::new();
            let bound = model.params().bind(&tape);
            let h = tape.constant(graph.features().gather_rows(mfgs[0].left_nodes())?);
            let h1 = model.layers()[0].forward(&bound, &mfgs[0], h, None)?;
            let alpha = layer.attention(&bound, &mfgs[1], h1, None)?;
            println!("  head 0 attention over {} edges: {:?}", mfgs[1].num_edges(), alpha[0].value().data());
        }
    }
    Ok(())
}

fn main() -> spargcp::Result<()> {
    run_example()
}
