from consist.campaign import CampaignConfig, Mode, run_campaign
from consist.records import format_summary
from consist.settings import CampaignSettings, engine_config

config = CampaignConfig(mode=Mode.CHESS_SCAN, output_dir="runs/tuto2",
                        settings=CampaignSettings(seed=1, sample_cap=200),
                        engine=engine_config("mock-planted-bug"),
                        checks=["board_transformations"])
result = run_campaign(config)
print(format_summary(result.summaries))
print("status", result.status, "records in", config.path("records.jsonl"))
