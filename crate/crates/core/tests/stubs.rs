//! Golden values for the offline providers and pinned hashes.
//!
//! Expected numbers were computed with a separate Python implementation of
//! FNV-1a + SplitMix64 and the trigram feature hashing.

use finforge_core::hash::HashAlgo;
use finforge_core::providers::{
    BigramLm, ChatMessage, ChatProvider, ScriptedChat, StubEmbedder, STUB_EMBED_DIM,
};
use finforge_core::simhash::{simhash64, Signature64};

fn nonzero(v: &[f64]) -> Vec<(usize, f64)> {
    v.iter()
        .copied()
        .enumerate()
        .filter(|(_, x)| *x != 0.0)
        .collect()
}

#[test]
fn hash_golden() {
    assert_eq!(
        HashAlgo::Fnv1aSplitMix.hash_str("abc"),
        0x29e3_2c04_ec3f_9c30
    );
}

#[test]
fn embedding_golden() {
    let v = StubEmbedder::embed_one("abc").unwrap();
    assert_eq!(v.len(), STUB_EMBED_DIM);
    assert_eq!(nonzero(&v), vec![(48, 1.0)]);

    assert_eq!(
        nonzero(&StubEmbedder::embed_one("ab").unwrap()),
        vec![(5, -1.0)]
    );

    // whitespace is ignored, eight distinct trigrams with unit weight
    let v = StubEmbedder::embed_one("净利润同比增长 12%").unwrap();
    let q = 0.353_553_390_593_273_73;
    let want = [
        (58, -q),
        (88, -q),
        (112, q),
        (140, q),
        (144, q),
        (174, q),
        (187, q),
        (227, -q),
    ];
    let got = nonzero(&v);
    assert_eq!(got.len(), want.len());
    for ((gi, gx), (wi, wx)) in got.iter().zip(want) {
        assert_eq!(*gi, wi);
        assert!((gx - wx).abs() < 1e-15, "dim {gi}: {gx} vs {wx}");
    }
    assert!(StubEmbedder::embed_one(" \n").is_none());
}

#[test]
fn simhash_golden() {
    let cases = [
        ("abc", 0x29e3_2c04_ec3f_9c30),
        ("净利润同比增长12%", 0x041f_9820_046a_90b8),
        (
            "公司发布年度报告，营业收入同比增长百分之十二。",
            0x041c_ff50_9e68_72fb,
        ),
    ];
    for (text, want) in cases {
        let sig = simhash64(text, 3, HashAlgo::Fnv1aSplitMix).unwrap();
        assert_eq!(sig, Signature64(want), "{text}: {:#x}", sig.0);
    }
}

#[test]
fn bigram_golden() {
    let lm = BigramLm::new();
    lm.observe(&["利润增长", "利润下降"]);
    // six distinct characters, V = 7; each of BOS->利 and 利->润 seen twice
    let s = lm.score("", "利润跌");
    assert!((s[0].logprob - (3.0f64 / 9.0).ln()).abs() < 1e-12);
    assert!((s[1].logprob - (3.0f64 / 9.0).ln()).abs() < 1e-12);
    // 润 preceded two transitions, neither to 跌
    assert!((s[2].logprob - (1.0f64 / 9.0).ln()).abs() < 1e-12);
}

#[test]
fn scripted_chat_loads_listed_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chat.json");
    std::fs::write(
        &path,
        r#"[{"system": "s", "messages": [{"role": "user", "content": "增长率？"}], "reply": "12%"}]"#,
    )
    .unwrap();
    let chat = ScriptedChat::from_file(&path).unwrap();
    assert_eq!(
        chat.chat("s", &[ChatMessage::user("增长率？")]).unwrap(),
        "12%"
    );
    assert!(chat.chat("", &[ChatMessage::user("增长率？")]).is_err());
}
