//! Regenerates the bundled fixtures under `fixtures/`.
//!
//! ```text
//! cargo run -p finforge-core --example gen_fixtures -- fixtures
//! ```
//!
//! Output is a pure function of the seed below.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use finforge_core::calc;
use finforge_core::eval::McqItem;
use finforge_core::jsonl;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const SEED: u64 = 20240611;

const COMPANIES: &[&str] = &[
    "华信证券",
    "东方银行",
    "长江基金",
    "恒远保险",
    "中泰资本",
    "北辰信托",
    "金桥租赁",
    "海川期货",
    "嘉和投资",
    "瑞丰银行",
    "星河科技",
    "远航物流",
    "宏达制造",
    "天元能源",
    "锦程地产",
    "新港医药",
];

const SECTORS: &[&str] = &[
    "银行",
    "保险",
    "券商",
    "新能源",
    "半导体",
    "医药",
    "消费",
    "房地产",
    "基建",
    "有色金属",
];

const SENTENCES: &[&str] = &[
    "{c}发布公告称，{y}年实现营业收入{n}亿元，同比增长{p}%。",
    "{c}{y}年归属于上市公司股东的净利润为{n}亿元，较上年同期下降{p}%。",
    "分析人士指出，{s}板块近期估值处于历史低位，配置价值逐步显现。",
    "央行本周通过公开市场操作净投放资金{n}亿元，市场流动性保持合理充裕。",
    "{y}年第三季度，{s}行业整体毛利率约为{p}%，环比小幅改善。",
    "监管部门表示，将进一步完善信息披露制度，提升资本市场透明度。",
    "受海外市场波动影响，{s}板块今日午后出现明显回调。",
    "{c}董事会审议通过了{y}年度利润分配预案，拟每10股派发现金红利{n}元。",
    "债券市场方面，十年期国债收益率下行{p}个基点，收于{n}%。",
    "多家机构预计，{s}行业明年盈利增速有望保持在{p}%左右。",
    "截至{y}年末，{c}资产总额为{n}亿元，资本充足率为{p}%。",
    "业内人士认为，稳健的货币政策将继续为实体经济提供有力支持。",
    "{c}表示，公司将持续加大研发投入，推动业务数字化转型。",
    "从资金流向看，北向资金本周净买入{s}板块约{n}亿元。",
    "报告期内，{c}经营活动产生的现金流量净额为{n}亿元。",
    "研究显示，居民储蓄率的变化与消费信心密切相关。",
    "{y}年以来，{s}行业共有{n}家企业完成首次公开发行。",
    "该基金经理表示，未来将重点关注{s}领域的结构性机会。",
    "根据公司年报，{c}的不良贷款率为{p}%，拨备覆盖率保持稳定。",
    "汇率方面，人民币对美元中间价报{n}，较前一交易日调升{p}个基点。",
    "{c}在{y}年度业绩说明会上披露，{s}相关业务收入占比提升至{p}%。",
    "据统计，{s}指数年初至今累计上涨{p}%，跑赢大盘。",
    "{c}拟发行不超过{n}亿元的绿色债券，募集资金用于{s}项目。",
    "本周{s}板块成交额合计{n}亿元，换手率为{p}%。",
    "评级机构维持{c}的主体信用等级，展望为稳定。",
    "{c}与{c}签署战略合作协议，双方将在{s}领域开展合作。",
    "{y}年{s}行业固定资产投资同比增长{p}%，增速较前值回落。",
    "市场人士预计，下周{s}板块或将维持震荡格局。",
    "{c}公告称，控股股东计划增持公司股份，金额不低于{n}亿元。",
    "数据显示，{y}年社会消费品零售总额同比增长{p}%。",
    "{c}的加权平均净资产收益率为{p}%，同比提高{p}个百分点。",
    "外资机构近期上调了对{s}行业的盈利预测。",
    "{c}预计上半年净利润区间为{n}亿元至{n}亿元。",
    "部分中小银行下调了定期存款利率，幅度为{p}个基点。",
    "{s}龙头企业{c}获得机构调研{n}次，关注度明显提升。",
    "截至本月末，{c}理财产品存续规模约{n}亿元。",
    "交易所对{c}下发问询函，要求说明{s}业务的经营情况。",
    "{y}年前三季度，{s}行业利润总额同比下降{p}%。",
    "{c}宣布回购股份，回购价格上限为每股{n}元。",
    "专家建议投资者关注{s}行业的长期成长性，避免追涨杀跌。",
];

const GENERAL_SENTENCES: &[&str] = &[
    "今天的天气晴朗，适合外出散步。",
    "图书馆新到了一批关于历史和地理的书籍。",
    "这座城市的公共交通系统十分便利。",
    "春天来了，公园里的花陆续开放。",
    "学习一门新语言需要长期的坚持和练习。",
    "周末的音乐会吸引了大量市民前来观看。",
    "科学家在深海中发现了一种新的生物。",
    "良好的睡眠习惯有助于身体健康。",
    "博物馆推出了以古代丝绸之路为主题的展览。",
    "社区组织志愿者清理了河边的垃圾。",
];

const GENERAL_EN: &[&str] = &[
    "The library opened a new reading room last spring. ",
    "Most rivers in the region flood during the rainy season. ",
    "Regular exercise improves both mood and sleep quality. ",
    "The museum hosts a small exhibition on early printing. ",
    "Volunteers planted two hundred trees along the river bank. ",
    "Learning to cook at home can be simple and rewarding. ",
    "The train from the coast arrives shortly after noon. ",
    "Astronomers observed a bright comet near the horizon. ",
];

const TERMS: &[(&str, &str)] = &[
    ("市盈率", "股票价格与每股收益的比值，用于衡量股票估值水平"),
    (
        "市净率",
        "股票价格与每股净资产的比值，常用于评估金融类公司的估值",
    ),
    (
        "净资产收益率",
        "净利润与平均股东权益的比值，反映股东权益的收益水平",
    ),
    (
        "资本充足率",
        "银行资本与风险加权资产的比率，衡量银行抵御风险的能力",
    ),
    ("不良贷款率", "不良贷款占贷款总额的比例，反映银行资产质量"),
    (
        "久期",
        "债券现金流的加权平均期限，用于衡量债券价格对利率变化的敏感度",
    ),
    ("到期收益率", "持有债券至到期所能获得的年化收益率"),
    ("可转换债券", "在一定条件下可以转换为发行公司股票的债券"),
    ("市值", "公司股票价格乘以总股本得到的总价值"),
    ("流动比率", "流动资产与流动负债的比值，衡量企业短期偿债能力"),
    ("速动比率", "速动资产与流动负债的比值，剔除了存货的影响"),
    (
        "资产负债率",
        "负债总额与资产总额的比值，反映企业的财务杠杆水平",
    ),
    ("毛利率", "毛利润占营业收入的比例，反映产品的盈利能力"),
    (
        "夏普比率",
        "投资组合超额收益与其波动率的比值，衡量风险调整后的收益",
    ),
    ("贝塔系数", "衡量单个资产相对于市场整体波动程度的指标"),
    ("量化宽松", "中央银行通过购买资产向市场注入流动性的货币政策"),
    (
        "存款准备金率",
        "商业银行按规定存放在中央银行的存款占其存款总额的比例",
    ),
    (
        "逆回购",
        "中央银行向一级交易商购买有价证券并约定未来卖回的操作",
    ),
    (
        "融资融券",
        "投资者向证券公司借入资金买入证券或借入证券卖出的交易",
    ),
    ("做市商", "在市场上持续提供买卖报价并承担流动性供给的机构"),
    (
        "对冲基金",
        "采用多种策略并通过对冲手段管理风险的私募投资基金",
    ),
    ("指数基金", "以特定指数成分股为投资对象、追踪指数表现的基金"),
    ("商誉", "收购价格超过被收购企业可辨认净资产公允价值的部分"),
    (
        "经营杠杆",
        "固定成本在总成本中所占比重对营业利润变动的放大作用",
    ),
    (
        "现金流量表",
        "反映企业一定期间内现金流入和流出情况的财务报表",
    ),
    (
        "信用违约互换",
        "买方定期支付费用以换取在信用事件发生时获得赔偿的合约",
    ),
    (
        "期权",
        "赋予持有者在约定时间以约定价格买入或卖出标的资产权利的合约",
    ),
    ("期货", "约定在未来某一时间按约定价格交割标的物的标准化合约"),
    (
        "通货膨胀",
        "一段时间内物价总水平持续上涨、货币购买力下降的现象",
    ),
    (
        "国内生产总值",
        "一个国家在一定时期内生产的全部最终产品和服务的市场价值",
    ),
    ("社会融资规模", "实体经济从金融体系获得的资金总额"),
    ("股息率", "每股股息与股票价格的比值，反映现金分红回报水平"),
    (
        "ESG投资",
        "在投资决策中综合考虑环境、社会和公司治理因素的投资理念",
    ),
    (
        "首次公开发行",
        "企业第一次向社会公众公开发行股票并上市的过程",
    ),
    (
        "资产证券化",
        "将缺乏流动性但能产生稳定现金流的资产转化为可交易证券的过程",
    ),
    ("利率互换", "交易双方交换不同计息方式利息现金流的金融合约"),
    ("杠杆率", "资产规模与权益资本之间的倍数关系"),
    ("系统性风险", "影响整个金融市场且无法通过分散投资消除的风险"),
    ("流动性风险", "无法以合理成本及时获得资金或变现资产的风险"),
    ("市场风险", "因市场价格不利变动而导致损失的风险"),
];

const QA_INSTRUCTIONS: &[&str] = &[
    "请回答下面的问题。",
    "请用通俗易懂的语言解释下列金融概念。",
    "作为金融分析师，请简要说明以下问题。",
    "请结合金融知识作答。",
];

const QA_QUESTIONS: &[&str] = &[
    "什么是{t}？",
    "请解释“{t}”的含义及其在投资分析中的作用。",
    "{t}通常如何理解？它有什么实际用途？",
];

fn fill(template: &str, rng: &mut ChaCha8Rng) -> String {
    let mut s = template.to_string();
    while let Some(i) = s.find('{') {
        let key = &s[i..i + 3];
        let v = match key {
            "{c}" => COMPANIES.choose(rng).unwrap().to_string(),
            "{s}" => SECTORS.choose(rng).unwrap().to_string(),
            "{y}" => rng.random_range(2015..=2023).to_string(),
            "{n}" => format!("{:.2}", rng.random_range(1.0..900.0)),
            "{p}" => format!("{:.1}", rng.random_range(0.5..40.0)),
            other => panic!("unknown slot {other}"),
        };
        s.replace_range(i..i + 3, &v);
    }
    s
}

fn paragraph(rng: &mut ChaCha8Rng, pool: &[&str], sentences: usize) -> String {
    (0..sentences)
        .map(|_| {
            let t = *pool.choose(rng).unwrap();
            fill(t, rng)
        })
        .collect()
}

fn document(rng: &mut ChaCha8Rng, pool: &[&str], target: std::ops::Range<usize>) -> String {
    let target_chars = rng.random_range(target);
    let mut paras: Vec<String> = Vec::new();
    let mut len = 0;
    while len < target_chars {
        let sentences = rng.random_range(2..6);
        let p = paragraph(rng, pool, sentences);
        len += p.chars().count() + 2;
        paras.push(p);
    }
    paras.join("\n\n")
}

fn gen_docs(rng: &mut ChaCha8Rng) -> Vec<serde_json::Value> {
    let domain_sources = ["finance_news", "report", "paper", "policy", "law"];
    let mut docs: Vec<serde_json::Value> = Vec::with_capacity(500);
    for i in 0..500 {
        let id = format!("doc-{i:04}");
        let roll = rng.random_range(0..100);
        let (source, text) = if i >= 20 && roll < 5 {
            // exact or single-character near duplicate of an earlier document
            let j = rng.random_range(0..docs.len());
            let prev = &docs[j];
            let mut text = prev["text"].as_str().unwrap().to_string();
            if roll < 3 {
                let at = text.char_indices().nth(text.chars().count() / 2).unwrap().0;
                text.insert(at, '，');
            }
            (prev["source"].as_str().unwrap().to_string(), text)
        } else if roll < 8 {
            let phone = format!(
                "1{}{:09}",
                rng.random_range(3..10),
                rng.random_range(0..1_000_000_000u64)
            );
            let body = document(rng, SENTENCES, 300..900);
            (
                "finance_news".into(),
                format!("{body}\n\n如需咨询请联系客户经理，电话{phone}。"),
            )
        } else if roll < 10 {
            let body = document(rng, SENTENCES, 300..900);
            (
                "report".into(),
                format!("{body}\n\n投资者关系邮箱：ir{i}@example.com"),
            )
        } else if roll < 12 {
            (
                "finance_news".into(),
                "点击链接立即领取新人红包！".repeat(rng.random_range(8..15)),
            )
        } else if roll < 14 {
            let junk = "==== ---- **** //// ++++ ".repeat(rng.random_range(10..30));
            ("report".into(), format!("附表{i}\n{junk}"))
        } else if roll < 30 {
            let len = rng.random_range(60..1200);
            if rng.random_bool(0.5) {
                (
                    "general_zh".into(),
                    document(rng, GENERAL_SENTENCES, len..len + 1),
                )
            } else {
                ("general_en".into(), document(rng, GENERAL_EN, len..len + 1))
            }
        } else if roll < 40 {
            let src = *domain_sources.choose(rng).unwrap();
            (src.into(), document(rng, SENTENCES, 2500..6000))
        } else if roll < 55 {
            let src = *domain_sources.choose(rng).unwrap();
            (src.into(), document(rng, SENTENCES, 40..150))
        } else {
            let src = *domain_sources.choose(rng).unwrap();
            (src.into(), document(rng, SENTENCES, 200..1800))
        };
        docs.push(json!({"id": id, "source": source, "text": text}));
    }
    docs
}

fn compute_record(rng: &mut ChaCha8Rng, i: usize, wrong: bool) -> serde_json::Value {
    let c = *COMPANIES.choose(rng).unwrap();
    let (question, expr, prefix, suffix) = match rng.random_range(0..4) {
        0 => {
            let rev = rng.random_range(100..100_000);
            let g = rng.random_range(1..40);
            (
                format!("{c}本年营业收入为{rev}万元，同比增长{g}%，求上年营业收入。"),
                format!("{rev}/(1+{g}%)"),
                "上年营业收入为",
                "万元。",
            )
        }
        1 => {
            let p = rng.random_range(1_000..1_000_000);
            let r = rng.random_range(1..9);
            let y = rng.random_range(2..6);
            (
                format!("本金{p}元，年利率{r}%，按年复利计息，{y}年后的本息和是多少？"),
                format!("{p}*(1+{r}%)^{y}"),
                "本息和为",
                "元。",
            )
        }
        2 => {
            let price = rng.random_range(5..200);
            let eps = f64::from(rng.random_range(10..500)) / 100.0;
            (
                format!("{c}股价为{price}元，每股收益为{eps}元，求市盈率。"),
                format!("{price}/{eps}"),
                "市盈率为",
                "倍。",
            )
        }
        _ => {
            let a = rng.random_range(100..50_000);
            let b = rng.random_range(100..50_000);
            (
                format!("{c}资产总额为{a}万元，负债总额为{b}万元，求资产负债率（百分比）。"),
                format!("{b}/{a}*100"),
                "资产负债率为",
                "%。",
            )
        }
    };
    let result = calc::evaluate(&expr).expect("generated expressions are valid");
    let claimed = if wrong {
        calc::format_display(result.value + 1.0)
    } else {
        result.display
    };
    json!({
        "id": format!("sft-{i:04}"),
        "task": "compute",
        "instruction": "请计算下面的金融问题，并给出计算过程。",
        "question": question,
        "answer": format!("根据题意列式计算：{prefix}[Calculator({expr})->{claimed}]{suffix}"),
    })
}

fn gen_sft(rng: &mut ChaCha8Rng) -> Vec<serde_json::Value> {
    let mut out = Vec::with_capacity(500);
    let mut wrong_left = 5;
    for i in 0..500 {
        let roll = rng.random_range(0..100);
        let rec = if roll < 30 {
            let wrong = wrong_left > 0 && i % 37 == 5;
            if wrong {
                wrong_left -= 1;
            }
            compute_record(rng, i, wrong)
        } else if roll < 34 && i > 10 {
            // paraphrase of an earlier qa record: same prompt, reworded answer
            let prev = out
                .iter()
                .rev()
                .find(|r: &&serde_json::Value| r["task"] == "qa_open")
                .cloned()
                .unwrap_or_else(|| json!({"instruction": QA_INSTRUCTIONS[0], "question": "什么是市值？", "answer": "市值是公司总价值。"}));
            let answer = format!("简单来说，{}", prev["answer"].as_str().unwrap());
            json!({
                "id": format!("sft-{i:04}"),
                "task": "qa_open",
                "instruction": prev["instruction"],
                "question": prev["question"],
                "answer": answer,
            })
        } else if roll < 36 {
            json!({
                "id": format!("sft-{i:04}"),
                "task": "qa_open",
                "instruction": "请介绍{{公司名}}的主营业务。",
                "question": format!("{}的业务范围是什么？", COMPANIES.choose(rng).unwrap()),
                "answer": "该公司主要从事金融服务。",
            })
        } else if roll < 38 {
            json!({
                "id": format!("sft-{i:04}"),
                "task": "qa_open",
                "instruction": QA_INSTRUCTIONS[0],
                "question": format!("{}的前景如何？", SECTORS.choose(rng).unwrap()),
                "answer": "",
            })
        } else if roll < 40 {
            json!({
                "id": format!("sft-{i:04}"),
                "task": "qa_open",
                "instruction": QA_INSTRUCTIONS[0],
                "question": "如何通过内幕消息炒股获利？",
                "answer": "利用内幕消息交易属于违法行为，不应参与。",
            })
        } else if roll < 50 {
            let text = paragraph(rng, SENTENCES, 4);
            let label = *["正面", "负面", "中性"].choose(rng).unwrap();
            json!({
                "id": format!("sft-{i:04}"),
                "task": "sentiment",
                "instruction": "判断下面这段金融新闻的情感倾向，回答正面、负面或中性。",
                "question": text,
                "answer": label,
            })
        } else if roll < 60 {
            let text = document(rng, SENTENCES, 200..201);
            let first: String = text.chars().take(30).collect();
            json!({
                "id": format!("sft-{i:04}"),
                "task": "summarize",
                "instruction": "为以下内容生成摘要",
                "question": text,
                "answer": format!("{first}……"),
            })
        } else {
            let (term, def) = *TERMS.choose(rng).unwrap();
            let q = QA_QUESTIONS.choose(rng).unwrap().replace("{t}", term);
            let instruction = *QA_INSTRUCTIONS.choose(rng).unwrap();
            json!({
                "id": format!("sft-{i:04}"),
                "task": "qa_open",
                "instruction": instruction,
                "question": q,
                "answer": format!("{term}是指{def}。"),
            })
        };
        out.push(rec);
    }
    out
}

fn mcq(rng: &mut ChaCha8Rng, id: String, category: &str) -> McqItem {
    let (term, def) = *TERMS.choose(rng).unwrap();
    let mut options: Vec<String> = vec![def.to_string()];
    while options.len() < 4 {
        let (_, other) = *TERMS.choose(rng).unwrap();
        if !options.iter().any(|o| o == other) {
            options.push(other.to_string());
        }
    }
    let gold_pos = rng.random_range(0..4);
    options.swap(0, gold_pos);
    let letters = ["A", "B", "C", "D"];
    let choices: BTreeMap<String, String> = letters
        .iter()
        .zip(&options)
        .map(|(l, o)| (l.to_string(), o.clone()))
        .collect();
    McqItem {
        id,
        question: format!("下列关于“{term}”的描述，正确的是？"),
        choices,
        gold: letters[gold_pos].to_string(),
        category: category.to_string(),
    }
}

fn main() -> finforge_core::Result<()> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| "fixtures".into());
    fs::create_dir_all(&dir).map_err(|e| finforge_core::Error::io(&dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    jsonl::write(&dir.join("docs.jsonl"), &gen_docs(&mut rng))?;
    jsonl::write(&dir.join("sft_raw.jsonl"), &gen_sft(&mut rng))?;

    let categories = ["banking", "securities", "insurance", "macro"];
    let items: Vec<McqItem> = (0..40)
        .map(|i| mcq(&mut rng, format!("mcq-{i:03}"), categories[i % 4]))
        .collect();
    jsonl::write(&dir.join("mcq.jsonl"), &items)?;
    let dev: Vec<McqItem> = (0..5)
        .map(|i| mcq(&mut rng, format!("dev-{i:03}"), categories[i % 4]))
        .collect();
    jsonl::write(&dir.join("mcq_dev.jsonl"), &dev)?;

    write_base_vocab(&dir.join("base_vocab.txt"))?;
    Ok(())
}

/// Single characters of every template plus a few common words, standing in
/// for a general-purpose tokenizer vocabulary.
fn write_base_vocab(path: &Path) -> finforge_core::Result<()> {
    let mut vocab: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for s in SENTENCES
        .iter()
        .chain(GENERAL_SENTENCES)
        .chain(COMPANIES)
        .chain(SECTORS)
    {
        vocab.extend(s.chars().filter(|c| !c.is_whitespace()).map(String::from));
    }
    vocab.extend("0123456789".chars().map(String::from));
    vocab.extend(["公司", "市场", "今天", "我们"].map(String::from));
    let body: String = vocab.into_iter().map(|t| t + "\n").collect();
    fs::write(path, body).map_err(|e| finforge_core::Error::io(path, e))
}
