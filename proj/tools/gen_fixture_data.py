#!/usr/bin/env python3
"""Regenerates the synthetic fixture data under data/ (corpus, scripted
answerer and judge, external stand-ins). Output is deterministic."""
import json, os
R = os.path.join(os.path.dirname(os.path.abspath(__file__)), '..', 'data')
conds = ["fever","cough","anemia","asthma","diabetes","migraine","ulcer","rash","infection","arthritis","insomnia","gout"]
drugs = ["aspirin","honey","iron","albuterol","insulin","rest","omeprazole","cream","penicillin","ibuprofen","melatonin","allopurinol"]
organs = ["blood","lung","blood","lung","pancreas","brain","stomach","skin","blood","bone","brain","kidney"]
all_organs = ["blood","lung","pancreas","brain","stomach","skin","bone","kidney"]
subjects = ["Pharmacology","Internal Medicine","Hematology","Pulmonology","Endocrinology","Neurology","Gastroenterology","Dermatology","Infectious Disease","Rheumatology","Psychiatry","Nephrology"]

def rot(opts, k):
    k %= len(opts)
    return opts[k:] + opts[:k]

def organ_options(gold, i):
    others = [o for o in all_organs if o != gold]
    picks = [others[(i + j * 2) % len(others)] for j in range(3)]
    # keep distinct
    out = []
    for p in picks:
        if p not in out: out.append(p)
    j = 0
    while len(out) < 3:
        if others[j] not in out: out.append(others[j])
        j += 1
    return rot([gold] + out, i)

def item(id_, q, opts, gold, ref, subject, set_="source", source_id=""):
    letter = chr(ord('A') + opts.index(gold))
    d = {"id": id_, "question": q, "options": {chr(65+k): o for k, o in enumerate(opts)},
         "answer_letter": letter, "answer_text": f"{letter}: {gold}", "reference": ref,
         "subject": subject, "set": set_, "source_id": source_id}
    return d

corpus = []
update_opts = {}
for i, c in enumerate(conds):
    gold = drugs[(i + 5) % 12]
    opts = rot([gold, drugs[i], drugs[(i + 3) % 12], drugs[(i + 8) % 12]], i)
    update_opts[i] = opts
    corpus.append(item(f"fx-{i+1:02d}", f"What treats {c}?", opts, gold,
                       f"Doctors treat {c} with {gold}.", subjects[i]))
for k, i in enumerate([1, 4, 7, 10]):
    c = conds[i]
    opts = organ_options(organs[i], k)
    corpus.append(item(f"fx-{13+k:02d}", f"Which organ does {c} affect?", opts, organs[i],
                       f"{c.capitalize()} often affects the {organs[i]}.", subjects[i]))
# Misleading references: the passage names a different organ than the key.
for k, i in enumerate([0, 6]):
    c = conds[i]
    wrong = "skin" if organs[i] != "skin" else "bone"
    opts = organ_options(organs[i], k + 1)
    if wrong not in opts: opts[(opts.index(organs[i]) + 1) % 4] = wrong
    corpus.append(item(f"fx-{17+k:02d}", f"Which organ does {c} affect?", opts, organs[i],
                       f"{c.capitalize()} often affects the {wrong}.", subjects[i]))
# No reference: cannot be verified.
nr = item("fx-19", "Which organ does asthma affect?", organ_options("lung", 3), "lung", None, "Pulmonology")
del nr["reference"]
corpus.append(nr)

os.makedirs(f"{R}/fixture", exist_ok=True)
with open(f"{R}/fixture/corpus.jsonl", "w") as f:
    for d in corpus: f.write(json.dumps(d) + "\n")

# Scripted judge: one gen + one ret scenario per update item.
rules = []
for i, c in enumerate(conds):
    gold = drugs[(i + 5) % 12]
    opts = rot(update_opts[i], 1)
    letter = chr(65 + opts.index(gold))
    gen = (f"QUESTION: A patient with {c} came to the clinic. What treats {c}?\n" +
           "\n".join(f"{chr(65+k)}: {o}" for k, o in enumerate(opts)) + f"\nANSWER: {letter}")
    if i == 6:
        # Malformed twice (three options) so the item is skipped.
        gen = (f"QUESTION: A patient with {c} came to the clinic. What treats {c}?\n" +
               "\n".join(f"{chr(65+k)}: {o}" for k, o in enumerate(opts[:3])) + "\nANSWER: A")
    rules.append({"all_of": [f"Source question: What treats {c}?", "places this fact"], "response": gen})
    j = (i + 1) % 12
    ro = organ_options(organs[j], i)
    rgold = organs[j]
    if i == 9:
        # Counterfactual key: the model answers the real organ, so the filter drops it.
        rgold = [o for o in ro if o != organs[j]][0]
    rl = chr(65 + ro.index(rgold))
    ret = (f"QUESTION: Which organ does {conds[j]} affect?\n" +
           "\n".join(f"{chr(65+k)}: {o}" for k, o in enumerate(ro)) + f"\nANSWER: {rl}")
    rules.append({"all_of": [f"Source question: What treats {c}?", "must not depend"], "response": ret})
for i, c in enumerate(conds):
    gold = drugs[(i + 5) % 12]
    rules.append({"all_of": ["step-by-step rationale", f"Question: What treats {c}?"],
                  "response": f"STEP 1: According to the reference, doctors treat {c} with {gold}.\n"
                              f"STEP 2: The options list {gold} as one choice.\n"
                              f"STEP 3: Therefore the answer is {gold}."})
rules.append({"contains": "Judge the factual accuracy", "response": "score: 5, hallucination: no"})
rules.append({"contains": "Rate the rationale", "response":
              "factual_accuracy: 4\nlogical_flow: 4\nrelevance: 5\ncompleteness: 3\nanswer_correctness: 4"})
with open(f"{R}/fixture/judge_script.json", "w") as f:
    json.dump({"identity": "scripted-judge-fixture", "rules": rules, "default": ""}, f, indent=1)
    f.write("\n")

# Scripted answerer mirroring the fixture model: reads drug references,
# otherwise answers from memory.
mrules = []
for i, c in enumerate(conds):
    for d in drugs:
        mrules.append({"all_of": [f"Reference: Doctors treat {c} with {d}.", f"What treats {c}?"], "response": f"The answer is {d}."})
for i, c in enumerate(conds):
    for o in all_organs:
        mrules.append({"all_of": [f"Reference: {c.capitalize()} often affects the {o}.", f"Which organ does {c} affect?"], "response": f"It affects the {o}."})
for i, c in enumerate(conds):
    mrules.append({"all_of": [f"Question: What treats {c}?"], "response": f"The answer is {drugs[i]}."})
    mrules.append({"all_of": [f"A patient with {c} came to the clinic. What treats {c}?"], "response": f"The answer is {drugs[i]}."})
    mrules.append({"all_of": [f"Which organ does {c} affect?"], "response": f"It affects the {organs[i]}."})
with open(f"{R}/fixture/scripted_model.json", "w") as f:
    json.dump({"identity": "scripted-answerer-fixture", "rules": mrules, "default": "I am not sure."}, f, indent=1)
    f.write("\n")

with open(f"{R}/fixture/preserved_prompts.txt", "w") as f:
    for p in ["The doctor walked to", "Asthma often affects the", "The farmer visited",
              "Question: Which organ does gout affect?\\nAnswer:", "A nurse drove to",
              "Insomnia often affects the", "The teacher painted", "Her brother found"]:
        f.write(p + "\n")

# External stand-ins.
med_subjects = ["anatomy","clinical_knowledge","college_medicine","human_aging","medical_genetics","nutrition","professional_medicine","virology"]
ext = []
n = 0
for i, c in enumerate(conds):
    opts = rot([drugs[i], drugs[(i+2)%12], drugs[(i+6)%12], drugs[(i+9)%12]], i)
    n += 1
    ext.append(item(f"ext-{n:02d}", f"What treats {c}?", opts, drugs[i], None, med_subjects[i % 8], "external"))
for i, c in enumerate(conds):
    opts = organ_options(organs[i], i + 2)
    n += 1
    ext.append(item(f"ext-{n:02d}", f"Which organ does {c} affect?", opts, organs[i], None, med_subjects[(i+3) % 8], "external"))
people = ["doctor","nurse","farmer","teacher","student","old man","young girl"]
places = ["the clinic","the hospital","the school","the market","the farm","the city","the village","the park"]
nonmed = ["high_school_geography","miscellaneous","sociology","world_religions","marketing","prehistory"]
for k in range(26):
    p = people[k % len(people)]
    right = places[k % 8]
    opts = rot([right, places[(k+3)%8], places[(k+5)%8], places[(k+6)%8]], k)
    n += 1
    ext.append(item(f"ext-{n:02d}", f"The {p} walked to {right}. Where did the {p} walk?", opts, right, None, nonmed[k % len(nonmed)], "external"))
for d in ext:
    if d["reference"] is None: del d["reference"]
os.makedirs(f"{R}/external", exist_ok=True)
with open(f"{R}/external/split_mcq.jsonl", "w") as f:
    for d in ext: f.write(json.dumps(d) + "\n")
with open(f"{R}/external/medical_subjects.txt", "w") as f:
    f.write("\n".join(med_subjects) + "\n")
arith = []
for k in range(20):
    a, b = 2 + (k * 7) % 17, 1 + (k * 5) % 11
    if k % 2 == 0:
        arith.append({"id": f"arith-{k+1:02d}", "question": f"What is {a} plus {b}?", "answer": str(a + b)})
    else:
        arith.append({"id": f"arith-{k+1:02d}", "question": f"What is {a} times {b}?", "answer": str(a * b)})
with open(f"{R}/external/arithmetic.jsonl", "w") as f:
    for d in arith: f.write(json.dumps(d) + "\n")
print(len(corpus), len(ext), len(rules), len(mrules))
