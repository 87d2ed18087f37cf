#!/usr/bin/env python3
"""Regenerate the shipped fixtures: article corpus and golden replay cassette.

The cassette is recorded by running the real pipeline against a scripted
provider, so its fingerprints always match the prompts the code produces.
Run from the repository root: python tools/make_fixtures.py
"""

from __future__ import annotations

import json
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

sys.path.insert(0, str(ROOT / "src"))

from srkit.llm import ChatRequest, ChatResponse, RecordProvider  # noqa: E402
from srkit.pipeline import Pipeline, PipelineConfig  # noqa: E402

QUERY_BATCH = """\
1. What are the causes of Hepatitis A and how is it diagnosed?
2. How is Hepatitis A transmitted between people?
3. What vaccination strategies prevent Hepatitis A infection?
4. How does Hepatitis A affect liver function?
5. What complications are associated with Hepatitis A?"""


class ScriptedProvider:
    """Answers the golden-path prompts; anything else is a hard error."""

    provider_id = "scripted"

    def complete(self, request: ChatRequest) -> ChatResponse:
        p = request.user_text
        if p.startswith("List up to") and "with causes," in p:
            return ChatResponse(text="", provider_id=self.provider_id)
        if p.startswith("List relations for causes"):
            return ChatResponse(text="", provider_id=self.provider_id)
        if p.startswith("List up to") and "with Hepatitis A," in p:
            return ChatResponse(text="Acetaminophen", provider_id=self.provider_id)
        if p.startswith("List relations for Hepatitis A"):
            return ChatResponse(
                text="Hepatitis A | associated with | Acetaminophen",
                provider_id=self.provider_id,
            )
        if p.startswith("Formulate 5 prompt queries"):
            return ChatResponse(text=QUERY_BATCH, provider_id=self.provider_id)
        raise AssertionError(f"unscripted prompt: {p!r}")


# --- corpus -------------------------------------------------------------------

SENTINELS = [
    {
        "pmid": "90000001",
        "title": "Causes of Hepatitis A infection and how the disease is diagnosed",
        "abstract": (
            "Hepatitis A is an acute liver infection and the main causes are "
            "ingestion of contaminated food and water. The disease is diagnosed "
            "by detection of IgM antibodies, and hepatitis A can be diagnosed "
            "early when clinicians combine laboratory testing with careful "
            "clinical evaluation of the patient. Because the inflamed liver "
            "handles drugs poorly, acetaminophen dosing deserves caution. "
            "Vaccination can prevent infection, and complications such as "
            "fulminant hepatitis remain rare."
        ),
        "mesh_headings": ["Hepatitis A", "Humans", "Diagnosis"],
        "pub_year": 2021,
        "journal": "Journal of Viral Hepatitis",
    },
    {
        "pmid": "90000002",
        "title": "How Hepatitis A is transmitted between people",
        "abstract": (
            "Hepatitis A is transmitted through the fecal-oral route, and the "
            "virus causes infection when people ingest contaminated food or "
            "water. Person-to-person spread between people in households "
            "explains most outbreaks. Understanding how the virus is "
            "transmitted guides hygiene measures, and vaccination of contacts "
            "can prevent secondary infection after exposure."
        ),
        "mesh_headings": ["Hepatitis A", "Disease Transmission, Infectious", "Humans"],
        "pub_year": 2020,
        "journal": "Epidemiology and Infection",
    },
    {
        "pmid": "90000003",
        "title": "Vaccination strategies to prevent Hepatitis A infection",
        "abstract": (
            "Vaccination strategies prevent Hepatitis A infection in children "
            "and travelers. Universal vaccination programs reduce the incidence "
            "of hepatitis A, while the virus still causes outbreaks in "
            "unvaccinated communities. Two-dose vaccination schedules prevent "
            "infection for decades, and catch-up strategies protect people at "
            "high risk of infection."
        ),
        "mesh_headings": ["Hepatitis A", "Hepatitis A Vaccines", "Vaccination"],
        "pub_year": 2022,
        "journal": "Vaccine",
    },
    {
        "pmid": "90000004",
        "title": "How Hepatitis A affects liver function",
        "abstract": (
            "Hepatitis A causes inflammation that can affect liver function "
            "for weeks. Markers of liver function such as transaminases rise "
            "while the virus replicates, and the liver usually recovers fully. "
            "Severe courses affect the liver more deeply, and acetaminophen "
            "metabolism by the liver is impaired, so dosing must respect "
            "reduced hepatic function."
        ),
        "mesh_headings": ["Hepatitis A", "Liver", "Liver Function Tests"],
        "pub_year": 2019,
        "journal": "Hepatology Research",
    },
    {
        "pmid": "90000005",
        "title": "Complications associated with Hepatitis A infection",
        "abstract": (
            "Most complications associated with Hepatitis A are mild, but the "
            "virus causes fulminant hepatitis in rare cases. Cholestatic and "
            "relapsing courses are complications associated with prolonged "
            "illness. Extrahepatic complications associated with hepatitis A "
            "include kidney injury. Clinicians monitor people with risk "
            "factors so complications are recognized early."
        ),
        "mesh_headings": ["Hepatitis A", "Humans", "Liver Failure, Acute"],
        "pub_year": 2021,
        "journal": "Clinical Infectious Diseases",
    },
]

HEPATITIS_DISTRACTORS = [
    {
        "pmid": "80000006",
        "title": "Seroprevalence of hepatitis A antibodies in adult blood donors",
        "abstract": (
            "We surveyed anti-HAV seroprevalence among blood donors. The virus "
            "causes a declining number of notified cases, yet susceptibility "
            "among younger donors is rising. Hepatitis A seroprevalence "
            "correlated with birth cohort and region of residence."
        ),
        "mesh_headings": ["Hepatitis A", "Seroepidemiologic Studies", "Blood Donors"],
        "pub_year": 2018,
        "journal": "Transfusion Medicine",
    },
    {
        "pmid": "80000007",
        "title": "Economic burden of hepatitis A outbreaks in food service settings",
        "abstract": (
            "Hepatitis A outbreaks traced to food service settings generate "
            "recall costs and legal claims. The virus causes measurable "
            "economic losses through closures and staff screening. We model "
            "direct and indirect costs across twelve documented episodes."
        ),
        "mesh_headings": ["Hepatitis A", "Food Microbiology", "Costs and Cost Analysis"],
        "pub_year": 2017,
        "journal": "Food Policy and Safety",
    },
    {
        "pmid": "80000008",
        "title": "Wastewater surveillance detects hepatitis A virus genotypes",
        "abstract": (
            "Municipal wastewater sampling recovered hepatitis A genomes weeks "
            "before clinical notifications. Genotype IA causes most detected "
            "signal in our catchment. Sequencing of wastewater extracts offers "
            "an early-warning complement to case surveillance."
        ),
        "mesh_headings": ["Hepatitis A", "Wastewater-Based Epidemiological Monitoring"],
        "pub_year": 2023,
        "journal": "Water Research",
    },
    {
        "pmid": "80000009",
        "title": "Molecular epidemiology of hepatitis A virus strains in Europe",
        "abstract": (
            "Phylogenetic analysis of hepatitis A isolates shows regional "
            "clustering. Strain IB causes the majority of sequenced cases in "
            "the Mediterranean basin. Molecular typing supports outbreak "
            "attribution across borders."
        ),
        "mesh_headings": ["Hepatitis A", "Molecular Epidemiology", "Phylogeny"],
        "pub_year": 2016,
        "journal": "Eurosurveillance",
    },
    {
        "pmid": "80000010",
        "title": "Hepatitis A seroconversion after travel to endemic regions",
        "abstract": (
            "Among returning travelers, hepatitis A seroconversion was "
            "documented in a minority of unprotected subjects. Travel to "
            "endemic regions causes measurable exposure risk that pre-travel "
            "counseling can address."
        ),
        "mesh_headings": ["Hepatitis A", "Travel", "Seroconversion"],
        "pub_year": 2015,
        "journal": "Journal of Travel Medicine",
    },
    {
        "pmid": "80000011",
        "title": "Shellfish harvesting controls after hepatitis A contamination events",
        "abstract": (
            "Bivalve shellfish concentrate enteric viruses. Contaminated "
            "harvesting water causes accumulation of hepatitis A virus in "
            "oysters. We review closure criteria and depuration practices "
            "after contamination events."
        ),
        "mesh_headings": ["Hepatitis A", "Shellfish", "Food Contamination"],
        "pub_year": 2014,
        "journal": "International Journal of Food Microbiology",
    },
    {
        "pmid": "80000012",
        "title": "Historical epidemics of hepatitis A in the nineteenth century",
        "abstract": (
            "Archival records describe campaign jaundice among soldiers. "
            "Retrospective reading suggests hepatitis A causes many of the "
            "documented outbreaks. We discuss the limits of historical "
            "diagnosis from clinical descriptions alone."
        ),
        "mesh_headings": ["Hepatitis A", "History, 19th Century"],
        "pub_year": 2013,
        "journal": "Medical History",
    },
    {
        "pmid": "80000013",
        "title": "Cost-effectiveness of hepatitis A screening before employment",
        "abstract": (
            "Screening food handlers for hepatitis A immunity causes "
            "administrative costs that may exceed averted outbreak expenses. "
            "Our decision model compares screening, blanket immunization, and "
            "no intervention across incidence scenarios."
        ),
        "mesh_headings": ["Hepatitis A", "Mass Screening", "Cost-Benefit Analysis"],
        "pub_year": 2019,
        "journal": "Health Economics Review",
    },
]

OTHER_TOPICS = [
    ("80000014", "Antimicrobial sutures for prevention of surgical site infections",
     "Triclosan-coated sutures reduced surgical site infections in a pooled analysis "
     "of abdominal operations. Antimicrobial suture material is one measure among "
     "several preventing wound complications.",
     ["Sutures", "Surgical Wound Infection", "Anti-Infective Agents"], 2020,
     "Annals of Surgery"),
    ("80000015", "Barbed suture techniques in laparoscopic wound closure",
     "Knotless barbed sutures shorten closure time in laparoscopic procedures. We "
     "compare running barbed suture techniques with interrupted conventional "
     "closure for fascial integrity.",
     ["Sutures", "Laparoscopy", "Wound Closure Techniques"], 2018, "Surgical Endoscopy"),
    ("80000016", "Absorbable versus nonabsorbable sutures for skin closure",
     "Absorbable sutures spare removal visits while nonabsorbable material offers "
     "tensile durability. Cosmetic outcomes at twelve months were equivalent in "
     "this randomized trial of skin closure.",
     ["Sutures", "Skin", "Wound Healing"], 2016, "Dermatologic Surgery"),
    ("80000017", "Antibiotic prophylaxis timing and surgical wound infection rates",
     "Administering prophylactic antibiotics within sixty minutes of incision "
     "lowered surgical wound infection rates. Timing audits improved compliance "
     "across participating hospitals in preventing infections.",
     ["Antibiotic Prophylaxis", "Surgical Wound Infection"], 2017, "JAMA Surgery"),
    ("80000018", "Catgut suture degradation kinetics in vivo",
     "Plain catgut loses tensile strength within a week while chromic treatment "
     "extends support. Degradation kinetics inform suture selection for mucosal "
     "closure.",
     ["Catgut", "Sutures", "Biodegradation"], 2012, "Journal of Biomedical Materials"),
    ("80000019", "Suture versus staples for orthopedic wound closure",
     "Metal staples speed closure but sutures yielded fewer superficial wound "
     "problems after knee arthroplasty in this pragmatic comparison.",
     ["Sutures", "Surgical Staplers", "Arthroplasty"], 2015, "Bone and Joint Journal"),
    ("80000020", "Negative pressure dressings for infected surgical wounds",
     "Negative pressure therapy promoted granulation in infected sternotomy "
     "wounds. Dressing changes were better tolerated than with packed gauze.",
     ["Negative-Pressure Wound Therapy", "Surgical Wound Infection"], 2019,
     "Wound Repair and Regeneration"),
    ("80000021", "Hand hygiene adherence and hospital-acquired infections",
     "An observational program linked hand hygiene adherence with lower rates of "
     "hospital-acquired infections across intensive care units.",
     ["Hand Hygiene", "Cross Infection"], 2014, "Infection Control Today"),
    ("80000022", "Perioperative glycemic control and infection risk in diabetics",
     "Tight perioperative glucose management reduced deep infections after "
     "cardiac surgery among diabetic patients without increasing hypoglycemia.",
     ["Diabetes Mellitus", "Blood Glucose", "Surgical Wound Infection"], 2018,
     "Diabetes Care"),
    ("80000023", "Suture material allergy: contact dermatitis case series",
     "We report contact dermatitis attributed to coated suture material in eleven "
     "patients. Patch testing identified the coating as the sensitizing agent.",
     ["Sutures", "Dermatitis, Contact"], 2011, "Contact Dermatitis"),
    ("80000024", "Wound dehiscence risk factors after midline laparotomy",
     "Emergency surgery, anemia, and coughing predicted fascial dehiscence. "
     "Continuous slowly absorbable sutures with small bites lowered the risk.",
     ["Surgical Wound Dehiscence", "Sutures", "Laparotomy"], 2013,
     "World Journal of Surgery"),
    ("80000025", "Prophylactic mesh versus sutures for stoma site closure",
     "Mesh reinforcement reduced incisional hernia after stoma reversal compared "
     "with suture closure alone in this multicenter trial.",
     ["Surgical Mesh", "Sutures", "Incisional Hernia"], 2021, "Lancet Surgery"),
    ("80000026", "Screening colonoscopy uptake after mailed reminders",
     "Mailed reminders with scheduling links increased screening colonoscopy "
     "uptake among adults overdue for colorectal cancer screening.",
     ["Colonoscopy", "Early Detection of Cancer"], 2020, "Preventive Medicine"),
    ("80000027", "Blood pressure variability and stroke outcomes",
     "Visit-to-visit blood pressure variability predicted worse functional "
     "outcomes after ischemic stroke independent of mean pressure.",
     ["Hypertension", "Stroke", "Blood Pressure"], 2017, "Stroke"),
    ("80000028", "Metformin adherence and cardiovascular events in type 2 diabetes",
     "Higher metformin adherence associated with fewer cardiovascular events in "
     "a retrospective cohort of adults with type 2 diabetes.",
     ["Metformin", "Diabetes Mellitus, Type 2", "Cardiovascular Diseases"], 2019,
     "Diabetologia"),
    ("80000029", "Asthma inhaler technique education in community pharmacies",
     "Pharmacist-led technique checks improved inhaler scores and reduced rescue "
     "medication use over six months.",
     ["Asthma", "Community Pharmacy Services"], 2016, "Respiratory Medicine"),
    ("80000030", "Sleep duration and incident obesity in shift workers",
     "Short sleep duration predicted incident obesity among rotating shift "
     "workers followed for five years.",
     ["Sleep", "Obesity", "Shift Work Schedule"], 2018, "Occupational Medicine"),
    ("80000031", "Telehealth follow-up after heart failure discharge",
     "Structured telehealth visits lowered thirty-day readmissions after heart "
     "failure hospitalization in a stepped-wedge implementation.",
     ["Heart Failure", "Telemedicine", "Patient Readmission"], 2022,
     "Journal of Cardiac Failure"),
    ("80000032", "Vitamin D supplementation and fracture incidence in older adults",
     "Supplementation did not reduce fracture incidence among community-dwelling "
     "older adults without deficiency.",
     ["Vitamin D", "Fractures, Bone", "Aged"], 2020, "New England Journal of Medicine"),
    ("80000033", "Antibiotic stewardship and resistance trends in pediatrics",
     "A stewardship bundle decreased broad-spectrum prescribing and stabilized "
     "local resistance trends in pediatric outpatient clinics.",
     ["Antimicrobial Stewardship", "Drug Resistance, Microbial", "Pediatrics"], 2021,
     "Pediatric Infectious Disease Journal"),
    ("80000034", "Mediterranean diet adherence and cognitive decline",
     "Greater adherence to a Mediterranean diet associated with slower cognitive "
     "decline in a longitudinal aging cohort.",
     ["Diet, Mediterranean", "Cognitive Dysfunction", "Aging"], 2015, "Neurology"),
    ("80000035", "Physical therapy versus surgery for meniscal tears",
     "Structured physical therapy achieved comparable function to arthroscopic "
     "surgery for degenerative meniscal tears at two years.",
     ["Meniscus", "Physical Therapy Modalities", "Arthroscopy"], 2013,
     "British Journal of Sports Medicine"),
    ("80000036", "Smoking cessation counseling in dental practices",
     "Brief counseling during dental visits increased quit attempts among daily "
     "smokers; pharmacotherapy referral strengthened the effect.",
     ["Smoking Cessation", "Dental Care"], 2012, "Tobacco Control"),
    ("80000037", "Influenza immunization of healthcare personnel and patient outcomes",
     "Higher personnel immunization coverage correlated with fewer nosocomial "
     "respiratory illnesses among inpatients during peak season.",
     ["Influenza Vaccines", "Health Personnel", "Cross Infection"], 2014,
     "Infection Control and Hospital Epidemiology"),
    ("80000038", "Opioid prescribing after ambulatory surgery: variation and reduction",
     "Default prescription size changes reduced opioid quantities dispensed after "
     "ambulatory procedures without raising refill requests.",
     ["Analgesics, Opioid", "Ambulatory Surgical Procedures"], 2019,
     "Anesthesia and Analgesia"),
    ("80000039", "Mindfulness programs for nurse burnout",
     "An eight-week mindfulness program lowered emotional exhaustion scores among "
     "hospital nurses compared with waitlist controls.",
     ["Burnout, Professional", "Mindfulness", "Nurses"], 2021,
     "Journal of Nursing Management"),
    ("80000040", "Ultrasound guidance for central venous catheter placement",
     "Real-time ultrasound guidance reduced mechanical complications of central "
     "venous catheter placement in emergency settings.",
     ["Catheterization, Central Venous", "Ultrasonography, Interventional"], 2011,
     "Critical Care Medicine"),
    ("80000041", "Probiotics for antibiotic-associated diarrhea in adults",
     "Probiotic co-administration reduced antibiotic-associated diarrhea "
     "incidence in hospitalized adults in this meta-analysis.",
     ["Probiotics", "Diarrhea", "Anti-Bacterial Agents"], 2016, "Gut Microbes"),
    ("80000042", "Air pollution exposure and childhood asthma exacerbations",
     "Short-term particulate spikes increased emergency visits for childhood "
     "asthma exacerbations in urban monitoring areas.",
     ["Air Pollution", "Asthma", "Child"], 2018, "Environmental Health Perspectives"),
    ("80000043", "Statin intolerance: rechallenge outcomes in lipid clinics",
     "Most patients labeled statin-intolerant tolerated rechallenge with an "
     "alternate agent or reduced dosing frequency.",
     ["Hydroxymethylglutaryl-CoA Reductase Inhibitors", "Dyslipidemias"], 2017,
     "Journal of Clinical Lipidology"),
    ("80000044", "Gestational weight gain guidelines and neonatal outcomes",
     "Adherence to gestational weight gain guidelines associated with fewer "
     "large-for-gestational-age births in this registry analysis.",
     ["Gestational Weight Gain", "Pregnancy Outcome"], 2020,
     "Obstetrics and Gynecology"),
    ("80000045", "Cataract surgery wait times and fall risk in the elderly",
     "Longer waits for first-eye cataract surgery associated with increased fall "
     "risk among patients over seventy-five.",
     ["Cataract Extraction", "Accidental Falls", "Aged"], 2015, "Ophthalmology"),
    ("80000046", "Workplace standing desks and musculoskeletal complaints",
     "Sit-stand workstations modestly reduced lower back complaints over twelve "
     "months in office employees.",
     ["Musculoskeletal Pain", "Workplace", "Ergonomics"], 2019,
     "Applied Ergonomics"),
    ("80000047", "Screen time and myopia progression in schoolchildren",
     "Daily recreational screen time predicted faster myopia progression; "
     "outdoor time attenuated the association.",
     ["Myopia", "Screen Time", "Child"], 2022, "Ophthalmic Epidemiology"),
    ("80000048", "Dairy intake and bone mineral density in adolescents",
     "Higher dairy intake associated with greater lumbar bone mineral density "
     "accrual across puberty in both sexes.",
     ["Dairy Products", "Bone Density", "Adolescent"], 2013, "Journal of Bone Research"),
    ("80000049", "Community health workers and blood pressure control",
     "Community health worker visits improved blood pressure control in "
     "underserved neighborhoods in a cluster randomized trial.",
     ["Community Health Workers", "Hypertension"], 2021, "Circulation"),
    ("80000050", "Green space access and depressive symptoms in urban adults",
     "Residential green space access associated with fewer depressive symptoms "
     "after adjustment for income and walkability.",
     ["Depression", "City Planning", "Environment Design"], 2016,
     "Social Psychiatry"),
]


def build_corpus() -> list[dict]:
    articles = list(SENTINELS) + list(HEPATITIS_DISTRACTORS)
    for pmid, title, abstract, headings, year, journal in OTHER_TOPICS:
        articles.append(
            {
                "pmid": pmid,
                "title": title,
                "abstract": abstract,
                "mesh_headings": headings,
                "pub_year": year,
                "journal": journal,
            }
        )
    return articles


def write_corpus(path: Path) -> None:
    articles = build_corpus()
    with open(path, "w", encoding="utf-8") as fh:
        for a in articles:
            fh.write(json.dumps(a, ensure_ascii=False) + "\n")
    print(f"wrote {len(articles)} articles to {path}")


def record_cassette(cassette_path: Path, corpus_path: Path) -> None:
    if cassette_path.exists():
        cassette_path.unlink()
    with tempfile.TemporaryDirectory() as tmp:
        config = PipelineConfig(
            kb_source=str(FIXTURES / "mesh_core.tsv"),
            provider="mock",
            pubmed_mode="fixture",
            corpus_path=str(corpus_path),
            sessions_dir=str(Path(tmp) / "sessions"),
            model_id="golden-chat",
        )
        pipeline = Pipeline(config)
        pipeline.gateway = RecordProvider(ScriptedProvider(), cassette_path)
        session = pipeline.run("What are the causes of Hepatitis A?")
    print(f"recorded {len(pipeline.gateway.cassette)} cassette entries")
    print(f"  queries: {[q.text for q in session.queries]}")
    print(f"  hits: {session.hits[:10]}")


def main() -> None:
    corpus_path = FIXTURES / "corpus.jsonl"
    write_corpus(corpus_path)
    record_cassette(FIXTURES / "cassettes" / "golden.jsonl", corpus_path)


if __name__ == "__main__":
    main()
