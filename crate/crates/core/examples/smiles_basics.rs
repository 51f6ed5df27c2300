//! Tokenize, parse and canonicalize SMILES strings.

use rxn_seq2seq::smiles::{canonicalize, detokenize, parse, tokenize, validate_valence};

fn main() {
    for smiles in ["OC(=O)c1ccccc1O", "c1ccccc1C(O)=O", "[Na+].[O-]C(=O)C", "C1=CC=CC=C1Br"] {
        let tokens = tokenize(smiles).expect("tokenizable");
        assert_eq!(detokenize(&tokens), smiles);
        let graphs = parse(smiles).expect("parsable");
        for g in &graphs {
            validate_valence(g).expect("valid valences");
        }
        let shown: Vec<&str> = tokens.iter().map(|t| t.as_ref()).collect();
        println!("{smiles:<22} {:<40} -> {}", shown.join(" "), canonicalize(smiles).unwrap());
    }
    match canonicalize("C(C)(C)(C)(C)C") {
        Ok(s) => println!("unexpectedly accepted {s}"),
        Err(e) => println!("pentavalent carbon rejected: {e}"),
    }
}
