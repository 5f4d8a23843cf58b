#!/usr/bin/env python3
"""Regenerate tests/fixtures/metric_parity.jsonl and metric_parity_corpus.json.

Expected values come from the reference scorers:
  * sacrebleu (sentence_bleu with default exp smoothing + effective order,
    corpus_bleu with smooth_method="none")
  * rouge_score (F1 of rouge1 / rouge2 / rougeL), fed the same tokens BLEU sees

Usage: python3 scripts/gen_metric_fixtures.py   (from crates/core)
"""
import json
import os

import sacrebleu
from rouge_score import rouge_scorer
from sacrebleu.tokenizers.tokenizer_13a import Tokenizer13a
from sacrebleu.tokenizers.tokenizer_zh import TokenizerZh

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURES = os.path.join(HERE, "..", "tests", "fixtures")

PAIRS = {
    "en-de": [
        ("Die Katze sitzt auf der Matte.", "Die Katze saß auf der Matte."),
        ("Er wurde 1954 in Berlin geboren und zog später nach München.", "Er wurde 1954 in Berlin geboren und zog danach nach München."),
        ("Das Album wurde im Jahr 2003 von Sony veröffentlicht.", "Das Album wurde 2003 von Sony herausgebracht."),
        ("Die Stadt liegt am Ufer des Flusses.", "Die Stadt befindet sich am Ufer des Flusses."),
        ("Sie spielte die Hauptrolle im Film \"Der lange Weg\".", "Sie spielte die Hauptrolle in dem Film \"Der lange Weg\"."),
        ("Der Bahnhof wurde im 19. Jahrhundert gebaut.", "Der Bahnhof ist im 19. Jahrhundert errichtet worden."),
        ("Ich weiß nicht, ob er morgen kommt.", "Ich weiß nicht, ob er morgen kommen wird."),
        ("Die Mannschaft gewann das Spiel mit 3:1.", "Das Team gewann die Partie 3:1."),
        ("Das Gebäude ist 120 Meter hoch.", "Das Gebäude hat eine Höhe von 120 Metern."),
        ("Wir haben das Problem gestern besprochen.", "Wir haben gestern über das Problem gesprochen."),
        ("Der Fluss mündet in die Nordsee.", "Der Fluss fließt in die Nordsee."),
        ("Sie ist die ältere Schwester von Anna.", "Sie ist Annas ältere Schwester."),
        ("Das Unternehmen hat seinen Sitz in Hamburg.", "Der Hauptsitz des Unternehmens befindet sich in Hamburg."),
        ("Nach dem Krieg kehrte er in seine Heimat zurück.", "Nach dem Krieg kehrte er in seine Heimat zurück."),
        ("Es regnet seit drei Tagen ununterbrochen.", "Seit drei Tagen regnet es ohne Pause."),
        ("Die Brücke verbindet die beiden Stadtteile.", "Die Brücke verbindet beide Stadtteile miteinander."),
        ("Er arbeitete als Lehrer an einer Grundschule.", "Er war Lehrer an einer Grundschule."),
        ("Das Museum ist montags geschlossen.", "Montags ist das Museum geschlossen."),
        ("Die Wahl fand am 5. Mai statt.", "Die Wahl wurde am 5. Mai abgehalten."),
        ("Kannst du mir bitte das Salz geben?", "Könntest du mir bitte das Salz reichen?"),
    ],
    "de-en": [
        ("The cat is sitting on the mat.", "The cat sat on the mat."),
        ("He was born in Berlin in 1954 and later moved to Munich.", "He was born in 1954 in Berlin and later moved to Munich."),
        ("The album was released by Sony in 2003.", "The album was published by Sony in 2003."),
        ("The town lies on the bank of the river.", "The town is located on the riverbank."),
        ("She played the lead role in the film \"The Long Way\".", "She starred in the film \"The Long Way\"."),
        ("The station was built in the 19th century.", "The railway station was constructed in the 19th century."),
        ("I don't know whether he will come tomorrow.", "I do not know if he is coming tomorrow."),
        ("The team won the match 3-1.", "The team won the game 3-1."),
        ("The building is 120 metres high.", "The building is 120 meters tall."),
        ("We discussed the problem yesterday.", "We talked about the problem yesterday."),
        ("The river flows into the North Sea.", "The river flows into the North Sea."),
        ("She is Anna's older sister.", "She is the older sister of Anna."),
        ("The company is headquartered in Hamburg.", "The company's headquarters are in Hamburg."),
        ("After the war, he returned to his homeland.", "After the war he went back to his home country."),
        ("It has been raining non-stop for three days.", "It has been raining for three days without a break."),
        ("The bridge connects the two districts.", "The bridge links both parts of the city."),
        ("He worked as a teacher at a primary school.", "He was a primary school teacher."),
        ("The museum is closed on Mondays.", "On Mondays the museum is closed."),
        ("The election took place on 5 May.", "The election was held on May 5."),
        ("Could you please pass me the salt?", "Can you pass me the salt, please?"),
    ],
    "en-zh": [
        ("猫坐在垫子上。", "猫正坐在垫子上。"),
        ("他1954年出生于柏林，后来搬到了慕尼黑。", "他于1954年生于柏林，之后迁居慕尼黑。"),
        ("这张专辑由索尼于2003年发行。", "该专辑于2003年由索尼发行。"),
        ("这座城镇位于河岸边。", "小镇坐落在河边。"),
        ("她在电影《漫长的路》中担任主角。", "她主演了电影《漫长的路》。"),
        ("这个车站建于19世纪。", "该火车站建于十九世纪。"),
        ("我不知道他明天会不会来。", "我不知道他明天是否会来。"),
        ("球队以3比1赢得了比赛。", "该队以3:1获胜。"),
        ("这座建筑高120米。", "这栋大楼有120米高。"),
        ("我们昨天讨论了这个问题。", "昨天我们讨论了这个问题。"),
        ("这条河流入北海。", "这条河注入北海。"),
        ("她是安娜的姐姐。", "她是安娜的姐姐。"),
        ("该公司总部设在汉堡。", "公司的总部位于汉堡。"),
        ("战争结束后，他回到了家乡。", "战后他返回了故乡。"),
        ("雨已经连续下了三天。", "已经不停地下了三天雨。"),
        ("这座桥连接着两个城区。", "这座桥把两个区连在一起。"),
        ("他曾在一所小学当老师。", "他是一名小学教师。"),
        ("博物馆周一闭馆。", "博物馆每周一关闭。"),
        ("选举于5月5日举行。", "选举在5月5日举行。"),
        ("你能把盐递给我吗？", "请把盐递给我好吗？"),
    ],
    "zh-en": [
        ("The cat sat on a mat.", "A cat is sitting on the mat."),
        ("He was born in Berlin in 1954 and moved to Munich afterwards.", "Born in Berlin in 1954, he later moved to Munich."),
        ("This album was released by Sony in 2003.", "The album was issued by Sony in 2003."),
        ("The small town is located by the river.", "The town sits on the river bank."),
        ("She was the main actress in the movie \"The Long Road\".", "She played the leading role in the film \"The Long Road\"."),
        ("This train station was built in the nineteenth century.", "The station dates from the 19th century."),
        ("I am not sure if he will come tomorrow.", "I don't know whether he'll come tomorrow."),
        ("The team won the game by 3 to 1.", "The team won 3:1."),
        ("This building is 120 m tall.", "The building is 120 metres high."),
        ("Yesterday we discussed this issue.", "We discussed this problem yesterday."),
        ("This river flows into the North Sea.", "The river empties into the North Sea."),
        ("She is the elder sister of Anna.", "She is Anna's big sister."),
        ("The headquarters of the company are in Hamburg.", "The company is based in Hamburg."),
        ("After the war ended, he went back to his hometown.", "After the war, he returned home."),
        ("It has rained for three consecutive days.", "It has been raining for three days in a row."),
        ("The bridge connects two districts of the city.", "The bridge joins the two city districts."),
        ("He used to be a teacher in a primary school.", "He once taught at an elementary school."),
        ("The museum is closed every Monday.", "The museum closes on Mondays."),
        ("The election was held on May 5th.", "The vote took place on 5 May."),
        ("Can you hand me the salt?", "Would you pass me the salt, please?"),
    ],
}


class _SameTokens:
    def __init__(self, tok):
        self._tok = tok

    def tokenize(self, text):
        return self._tok(text.rstrip()).split()


def main():
    records = []
    corpus = {}
    for pair, items in PAIRS.items():
        tgt = pair.split("-")[1]
        tok_name = "zh" if tgt == "zh" else "13a"
        tok = TokenizerZh() if tgt == "zh" else Tokenizer13a()
        scorer = rouge_scorer.RougeScorer(
            ["rouge1", "rouge2", "rougeL"], tokenizer=_SameTokens(tok)
        )
        hyps = [h for h, _ in items]
        refs = [r for _, r in items]
        for hyp, ref in items:
            bleu = sacrebleu.sentence_bleu(hyp, [ref], tokenize=tok_name)
            rs = scorer.score(ref, hyp)
            records.append(
                {
                    "lang_pair": pair,
                    "hypothesis": hyp,
                    "reference": ref,
                    "expected_bleu": bleu.score,
                    "expected_rouge1": rs["rouge1"].fmeasure,
                    "expected_rouge2": rs["rouge2"].fmeasure,
                    "expected_rougel": rs["rougeL"].fmeasure,
                }
            )
        corpus[pair] = sacrebleu.corpus_bleu(
            hyps, [refs], tokenize=tok_name, smooth_method="none"
        ).score

    # Single reference pair used in unit tests.
    ex = sacrebleu.sentence_bleu("the cat sat on the mat", ["the cat was sitting on the mat"])
    corpus["example_sentence_bleu"] = ex.score

    with open(os.path.join(FIXTURES, "metric_parity.jsonl"), "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    with open(os.path.join(FIXTURES, "metric_parity_corpus.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {"sacrebleu_version": sacrebleu.__version__, "corpus_bleu": corpus},
            fh,
            ensure_ascii=False,
            indent=2,
        )
        fh.write("\n")


if __name__ == "__main__":
    main()
