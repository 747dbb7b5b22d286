"""Smoke test for the Python extension.

Build and install first:  pip install ./crates/python
"""

from pathlib import Path

import invoicekit_py as ik

FIXTURE = Path(__file__).resolve().parent.parent / "crates/cli/tests/fixtures/invoice_en.tsv"


def main():
    # one confusion substitution costs 0.1, any other edit 1.0
    assert abs(ik.weighted_edit_distance("total", "tota1") - 0.1) < 1e-12
    assert abs(ik.weighted_edit_distance("total", "totax") - 1.0) < 1e-12

    assert ik.classify_match("BX0EF24CA4E2", "BXOEF24CA4E2", "ORDER NUMBER") == "PARTIAL"
    assert ik.iban_valid("GB82 WEST 1234 5698 7654 32")
    assert not ik.iban_valid("GB82 WEST 1234 5698 7654 33")
    assert ik.company_id_valid("00176150")
    assert not ik.company_id_valid("00176151")

    p = ik.Pipeline()
    data = FIXTURE.read_bytes()
    doc = p.analyze("invoice_en", data, "tsv")
    assert doc["source_id"] == "invoice_en" and len(doc["pages"]) == 1
    annotated, report = p.extract(doc, "auto")
    assert report["language"] == "en"
    assert any(b["block_types"] for b in annotated["pages"][0]["blocks"])
    values = {f["field"]: f["value"] for f in report["fields"]}
    assert values.get("INVOICE NUMBER") == "2021-0042", values
    assert p.run("invoice_en", data) == report

    for bad in (lambda: ik.Pipeline(mode="fuzzy"), lambda: p.analyze("x", b"level\tpage_num\n5\tx\n", "tsv")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
