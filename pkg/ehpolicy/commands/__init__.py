def main():
    from ehpolicy import create_cli

    create_cli()(prog_name='eh-policy')
