#!/usr/bin/env python3
"""Regenerates fixtures/classifier.tsv (text<TAB>label) from templates."""

import random
import sys

TOPICS = [
    "knowledge graph", "graph neural network", "transformer", "bert", "image classification", "object detection",
    "machine translation", "question answering", "reinforcement learning", "contrastive learning", "diffusion model",
    "named entity recognition", "sentiment analysis", "speech recognition", "federated learning",
    "knowledge distillation", "word embeddings", "attention mechanism", "convolutional neural network",
    "recurrent neural network", "generative adversarial network", "dropout", "batch normalization",
    "variational autoencoder", "semantic segmentation", "text summarization", "hnsw",
    "approximate nearest neighbor search", "citation recommendation", "expert finding", "entity linking",
    "topic modeling", "few-shot learning", "meta learning", "graph embeddings", "tpu", "imagenet", "squad",
    "bleu score", "learning rate schedules",
]
PLURAL = ["TPUs", "GPUs", "parameters", "layers", "epochs", "examples", "attention heads", "training steps"]

QUESTION = [
    "What is {t}?", "What is a {t}", "How does {t} work?", "How many {p} are needed to train {t}?",
    "Why does {t} outperform {u}?", "Which datasets are used for {t}?", "Which methods work best for {t}?",
    "When was {t} introduced?", "Who proposed {t}?", "Is {t} better than {u}?", "Are {t} models robust to noise?",
    "Does {t} need labeled data?", "Can {t} be applied to {u}?", "what are the limitations of {t}",
    "how do i evaluate {t}", "What metrics are used to evaluate {t}?", "Why is {t} so popular?",
    "How is {t} different from {u}?", "which benchmark is standard for {t}?", "Is there a survey on {t}?",
    "What are recent advances in {t}?", "How can {t} improve {u}?", "Can I use {t} without {p}?",
    "Does {t} scale to large corpora?",
]
KEYWORD = [
    "{t}", "{t}", "{t} {u}", "{t} survey", "{t} benchmark", "{t} for {u}", "{t} pretraining", "efficient {t}",
    "{t} evaluation", "{t} dataset", "scalable {t}", "{t} 2023", "{t} tutorial", "robust {t}", "{t} and {u}",
]

# Conversational turns: a greeting or reaction, optionally followed by a remark.
OPENERS = ["hello", "hi", "hi there", "hey", "thanks", "thank you", "ok", "okay", "cool", "nice", "great", "oops",
           "sorry", "yes", "no", "hmm", "lol", "awesome", "good morning", "bye", "never mind", "wow", "sure", "alright"]
REMARKS = ["that was helpful", "this result looks wrong", "i like this one", "show me more", "let me try again",
           "wrong window", "see you later", "for the help", "i will read it tomorrow", "this is not what i meant",
           "please go back", "i am new here", "i disagree with that ranking", "interesting", "so much",
           "not what i wanted", "you are fast", "i need a break", "that is it for today", "makes sense"]

# Held out of the training data because they are used as worked examples.
EXCLUDE = {"How many TPUs are needed to train BERT?".lower(), "knowledge graph"}


def generate(seed=11, counts=(("question", 75), ("keyword", 65), ("other", 60))):
    r = random.Random(seed)

    def topic_fill(template):
        a, b = r.sample(TOPICS, 2)
        return template.format(t=a, u=b, p=r.choice(PLURAL))

    def other():
        shape = r.random()
        if shape < 0.35:
            return r.choice(OPENERS)
        if shape < 0.7:
            return r.choice(REMARKS)
        return r.choice(OPENERS) + " " + r.choice(REMARKS)

    make = {"question": lambda: topic_fill(r.choice(QUESTION)), "keyword": lambda: topic_fill(r.choice(KEYWORD)),
            "other": other}
    rows = set()
    for label, n in counts:
        have = 0
        for _ in range(n * 50):
            if have == n:
                break
            text = make[label]()
            if text.lower() in EXCLUDE or (text, label) in rows:
                continue
            rows.add((text, label))
            have += 1
    rows = sorted(rows)
    r.shuffle(rows)
    return rows


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "fixtures/classifier.tsv"
    with open(out, "w") as f:
        for text, label in generate():
            f.write(f"{text}\t{label}\n")


if __name__ == "__main__":
    main()
