from .cli import cli_parser


if __name__ == "__main__":
    cli_parser()
